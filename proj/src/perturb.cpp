#include "mdn/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mdn/norms.hpp"
#include "mdn/rng.hpp"

namespace mdn {

namespace {

double median_sorted_copy(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t rank = (v.size() + 1) / 2;  // nearest-rank at p = 0.5
    return v[rank - 1];
}

}  // namespace

double extreme_value_mc(std::size_t m, std::size_t trials, std::uint64_t seed) {
    if (m < 1) throw std::invalid_argument("extreme_value_mc: m must be >= 1");
    if (trials < 1) throw std::invalid_argument("extreme_value_mc: trials must be >= 1");
    Rng rng(seed);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const double v = rng.gaussian();
        double best = rng.gaussian();
        for (std::size_t i = 1; i < m; ++i) best = std::max(best, rng.gaussian());
        if (v >= best) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

double sigma_from_margins(const MarginStats& stats, const CushionProfile& cushions, int d) {
    const double r = stats.mean_r;
    const double theta = std::sqrt(stats.var_theta2);
    if (!(r > theta)) throw std::invalid_argument("sigma_from_margins: need r > theta");
    double sum = 0.0;
    for (int i = 0; i < cushions.depth; ++i) {
        const double mu = cushions.layer.mu[i];
        const double mu_min = cushions.inter.mu_min[i];
        sum += 1.0 / (mu * mu * mu_min * mu_min);
    }
    return (r - theta) /
           (8.0 * cushions.contraction.c * static_cast<double>(d) * (r + theta) * std::sqrt(sum));
}

NetworkParams inject_noise(const NetworkParams& params, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("inject_noise: sigma must be >= 0");
    if (sigma == 0.0) return params;
    std::vector<DenseMatrix> noisy;
    noisy.reserve(params.weights.size());
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const DenseMatrix& w = params.weights[l];
        const double wf = matrix_norm(w, MatrixNorm::frobenius);
        Rng rng(derive_seed(seed, l));
        DenseMatrix out = w;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.data()[i] += sigma * rng.gaussian() * wf;
        }
        noisy.push_back(std::move(out));
    }
    return NetworkParams(std::move(noisy));
}

PerturbReport perturbation_experiment(const NetworkParams& params, const Dataset& data,
                                      const MarginStats& stats, const CushionProfile& cushions,
                                      std::size_t trials, std::uint64_t seed,
                                      double sigma_override) {
    if (trials < 1) throw std::invalid_argument("perturbation_experiment: trials must be >= 1");
    if (data.size() == 0) throw std::invalid_argument("perturbation_experiment: empty dataset");

    const double r = stats.mean_r;
    const double theta = std::sqrt(stats.var_theta2);
    const double sigma = sigma_override >= 0.0
                             ? sigma_override
                             : sigma_from_margins(stats, cushions, params.depth());

    PerturbReport report;
    report.sigma = sigma;
    report.trials = trials;
    report.threshold = (r - theta) / 8.0;

    std::vector<DenseVector> base_scores;
    base_scores.reserve(data.size());
    for (std::size_t s = 0; s < data.size(); ++s) {
        base_scores.push_back(forward(params, data.features[s]).scores());
    }

    std::vector<double> wfro(params.weights.size());
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        wfro[l] = matrix_norm(params.weights[l], MatrixNorm::frobenius);
    }

    const double scales[3] = {0.5 * sigma, sigma, 2.0 * sigma};
    std::vector<double>* buckets[3] = {&report.deltas_half_sigma, &report.deltas,
                                       &report.deltas_double_sigma};
    for (auto* b : buckets) b->reserve(trials);

    for (std::size_t t = 0; t < trials; ++t) {
        // Unit-scale noise directions shared across the three scales.
        std::vector<DenseMatrix> direction;
        direction.reserve(params.weights.size());
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            const DenseMatrix& w = params.weights[l];
            DenseMatrix b(w.rows(), w.cols());
            Rng rng(derive_seed(derive_seed(seed, t), l));
            rng.fill_gaussian(b.data(), b.size());
            direction.push_back(std::move(b));
        }
        for (int sc = 0; sc < 3; ++sc) {
            NetworkParams noisy = params;
            for (std::size_t l = 0; l < noisy.weights.size(); ++l) {
                double* out = noisy.weights[l].data();
                const double* dir = direction[l].data();
                const double a = scales[sc] * wfro[l];
                for (std::size_t idx = 0; idx < noisy.weights[l].size(); ++idx) {
                    out[idx] += a * dir[idx];
                }
            }
            double max_delta = 0.0;
            for (std::size_t s = 0; s < data.size(); ++s) {
                const DenseVector scores = forward(noisy, data.features[s]).scores();
                double diff_sq = 0.0;
                for (std::size_t u = 0; u < scores.dim(); ++u) {
                    const double diff = scores[u] - base_scores[s][u];
                    diff_sq += diff * diff;
                }
                max_delta = std::max(max_delta, std::sqrt(diff_sq));
            }
            buckets[sc]->push_back(max_delta);
        }
    }

    std::size_t below = 0;
    for (double dl : report.deltas) {
        if (dl < report.threshold) ++below;
    }
    report.fraction_below_threshold = static_cast<double>(below) / static_cast<double>(trials);
    report.median = median_sorted_copy(report.deltas);
    report.quantile_1_minus_delta = report.median;  // delta fixed at 1/2
    report.max = *std::max_element(report.deltas.begin(), report.deltas.end());
    report.median_half_sigma = median_sorted_copy(report.deltas_half_sigma);
    report.median_double_sigma = median_sorted_copy(report.deltas_double_sigma);
    return report;
}

nlohmann::json perturb_report_json(const PerturbReport& r) {
    nlohmann::json j;
    j["sigma"] = r.sigma;
    j["trials"] = r.trials;
    j["threshold"] = r.threshold;
    j["fraction_below_threshold"] = r.fraction_below_threshold;
    j["delta_stats"] = {{"median", r.median},
                        {"quantile_1_minus_delta", r.quantile_1_minus_delta},
                        {"max", r.max}};
    j["scaling"] = {{"median_half_sigma", r.median_half_sigma},
                    {"median_double_sigma", r.median_double_sigma}};
    return j;
}

void write_perturb_trials_csv(const PerturbReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for write");
    out << "trial,delta,delta_half_sigma,delta_double_sigma\n";
    char buf[32];
    for (std::size_t t = 0; t < r.deltas.size(); ++t) {
        out << t;
        for (double v : {r.deltas[t], r.deltas_half_sigma[t], r.deltas_double_sigma[t]}) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace mdn
