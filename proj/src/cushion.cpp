#include "mdn/cushion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mdn/kernels.hpp"
#include "mdn/norms.hpp"
#include "mdn/rng.hpp"

namespace mdn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nearest-rank quantile of a sorted sample: q_p = v[ceil(p*N) - 1].
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

// Forward from layer-i output: M^{i,j}(v) = W_j relu(... relu(v)).
DenseVector compose_from(const NetworkParams& params, int i, int j, const DenseVector& v) {
    const auto& k = kernels::active();
    DenseVector u = v;
    for (int l = i + 1; l <= j; ++l) {
        DenseVector post(u.dim());
        k.relu(post.data(), u.data(), u.dim());
        u = matvec(params.weights[l - 1], post);
    }
    return u;
}

}  // namespace

LayerCushions layer_cushions(const NetworkParams& params, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("layer_cushions: empty dataset");
    const int d = params.depth();

    std::vector<double> wfro(d);
    for (int i = 1; i <= d; ++i) wfro[i - 1] = matrix_norm(params.weights[i - 1], MatrixNorm::frobenius);

    LayerCushions out;
    out.mu.assign(d, kInf);
    out.witness.assign(d, 0);
    std::vector<bool> seen(d, false);

    for (std::size_t s = 0; s < data.size(); ++s) {
        const ForwardTrace trace = forward(params, data.features[s]);
        for (int i = 1; i <= d; ++i) {
            const double denom = wfro[i - 1] * norm2(trace.layer_input(i));
            if (denom == 0.0) {
                ++out.skipped;
                continue;
            }
            const double ratio = norm2(trace.preacts[i - 1]) / denom;
            if (ratio < out.mu[i - 1]) {
                out.mu[i - 1] = ratio;
                out.witness[i - 1] = s;
            }
            seen[i - 1] = true;
        }
    }
    for (int i = 0; i < d; ++i) {
        if (!seen[i]) {
            throw std::runtime_error("layer_cushions: all samples skipped at layer " +
                                     std::to_string(i + 1));
        }
    }
    return out;
}

InterlayerCushions interlayer_cushions(const NetworkParams& params, const Dataset& data,
                                       InterlayerDenom denom) {
    if (data.size() == 0) throw std::invalid_argument("interlayer_cushions: empty dataset");
    const int d = params.depth();

    InterlayerCushions out;
    out.rho_cap = 1.0 / std::sqrt(static_cast<double>(params.max_width()));
    out.mu.assign(d, {});
    out.witness.assign(d, {});
    for (int i = 1; i <= d; ++i) {
        out.mu[i - 1].assign(d - i + 1, kInf);
        out.witness[i - 1].assign(d - i + 1, 0);
    }

    for (std::size_t s = 0; s < data.size(); ++s) {
        const ForwardTrace trace = forward(params, data.features[s]);
        for (int i = 1; i <= d; ++i) {
            const double denom_base = denom == InterlayerDenom::postact_prev
                                          ? norm2(trace.layer_input(i))
                                          : norm2(trace.preacts[i - 1]);
            for (int j = i; j <= d; ++j) {
                double jac_fro;
                if (j == i) {
                    jac_fro = std::sqrt(static_cast<double>(params.weights[i - 1].rows()));
                } else {
                    const DenseMatrix jac = jacobian_between(params, trace, i, j);
                    jac_fro = matrix_norm(jac, MatrixNorm::frobenius);
                }
                const double divisor = jac_fro * denom_base;
                if (divisor == 0.0) {
                    ++out.skipped;
                    continue;
                }
                const double ratio = norm2(trace.preacts[j - 1]) / divisor;
                auto& cell = out.mu[i - 1][j - i];
                if (ratio < cell) {
                    cell = ratio;
                    out.witness[i - 1][j - i] = s;
                }
            }
        }
    }

    out.mu_min.assign(d, out.rho_cap);
    for (int i = 1; i <= d; ++i) {
        for (int j = i; j <= d; ++j) {
            const double v = out.mu[i - 1][j - i];
            if (std::isfinite(v)) out.mu_min[i - 1] = std::min(out.mu_min[i - 1], v);
        }
    }
    return out;
}

ActivationContraction activation_contraction(const NetworkParams& params, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("activation_contraction: empty dataset");
    const int d = params.depth();

    ActivationContraction out;
    if (d == 1) return out;  // no hidden layers: vacuous, c = 1

    out.c = 1.0;  // relu never grows the norm, so c >= 1 with equality when nothing is clipped
    for (std::size_t s = 0; s < data.size(); ++s) {
        const ForwardTrace trace = forward(params, data.features[s]);
        for (int i = 1; i <= d - 1; ++i) {
            const double pre = norm2(trace.preacts[i - 1]);
            const double post = norm2(trace.postacts[i - 1]);
            if (pre == 0.0) continue;  // zero vector constrains nothing
            double ratio;
            if (post == 0.0) {
                ratio = kInf;
                out.degenerate = true;
            } else {
                ratio = pre / post;
            }
            if (ratio > out.c) {
                out.c = ratio;
                out.witness_sample = s;
                out.witness_layer = i;
            }
        }
    }
    return out;
}

double interlayer_smoothness(const NetworkParams& params, const Dataset& data, double sigma,
                             std::size_t trials, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw std::invalid_argument("interlayer_smoothness: sigma must be > 0");
    if (trials < 1) throw std::invalid_argument("interlayer_smoothness: trials must be >= 1");
    if (data.size() == 0) throw std::invalid_argument("interlayer_smoothness: empty dataset");
    const int d = params.depth();

    std::vector<double> values;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const ForwardTrace trace = forward(params, data.features[s]);
        for (int i = 1; i < d; ++i) {
            const DenseVector& xi = trace.preacts[i - 1];
            const double xi_norm = norm2(xi);
            if (xi_norm == 0.0) continue;
            for (int j = i + 1; j <= d; ++j) {
                const double xj_norm = norm2(trace.preacts[j - 1]);
                if (xj_norm == 0.0) continue;  // skipped with no constraint
                const DenseMatrix jac = jacobian_between(params, trace, i, j);
                for (std::size_t t = 0; t < trials; ++t) {
                    Rng rng(derive_seed(seed, (((s * 64 + std::size_t(i)) * 64 + std::size_t(j)) << 20) + t));
                    DenseVector eta(xi.dim());
                    rng.fill_gaussian(eta.data(), eta.dim());
                    double eta_norm = norm2(eta);
                    if (eta_norm == 0.0) continue;
                    const double target = sigma * xi_norm;
                    kernels::active().scale(eta.data(), target / eta_norm, eta.dim());
                    eta_norm = target;

                    DenseVector v(xi.dim());
                    for (std::size_t u = 0; u < v.dim(); ++u) v[u] = xi[u] + eta[u];
                    const DenseVector nonlinear = compose_from(params, i, j, v);
                    const DenseVector linear = matvec(jac, v);
                    double diff_sq = 0.0;
                    for (std::size_t u = 0; u < nonlinear.dim(); ++u) {
                        const double t2 = nonlinear[u] - linear[u];
                        diff_sq += t2 * t2;
                    }
                    values.push_back(std::sqrt(diff_sq) * xi_norm / (eta_norm * xj_norm));
                }
            }
        }
    }
    if (values.empty()) return kInf;  // no pairs (d == 1) or all skipped: vacuous
    std::sort(values.begin(), values.end());
    const double median = quantile_sorted(values, 0.5);
    return median > 0.0 ? 1.0 / median : kInf;
}

CushionProfile estimate_cushions(const NetworkParams& params, const Dataset& data,
                                 const CushionOptions& opts) {
    CushionProfile profile;
    profile.depth = params.depth();
    profile.rho = params.max_width();
    profile.layer = layer_cushions(params, data);
    profile.inter = interlayer_cushions(params, data, opts.denom);
    profile.contraction = activation_contraction(params, data);
    if (opts.smoothness_trials > 0) {
        profile.smoothness_rho = interlayer_smoothness(params, data, opts.smoothness_sigma,
                                                       opts.smoothness_trials, opts.seed);
        profile.smoothness_estimated = true;
    } else {
        profile.smoothness_rho = std::numeric_limits<double>::quiet_NaN();
    }
    return profile;
}

namespace {

nlohmann::json finite_or_string(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

nlohmann::json cushion_profile_json(const CushionProfile& profile) {
    nlohmann::json j;
    j["depth"] = profile.depth;
    j["rho"] = profile.rho;
    j["rho_cap"] = profile.inter.rho_cap;
    j["layer_cushion"] = {{"mu", profile.layer.mu},
                          {"witness", profile.layer.witness},
                          {"skipped", profile.layer.skipped}};
    nlohmann::json inter = nlohmann::json::array();
    for (std::size_t i = 0; i < profile.inter.mu.size(); ++i) {
        for (std::size_t off = 0; off < profile.inter.mu[i].size(); ++off) {
            inter.push_back({{"i", i + 1},
                             {"j", i + 1 + off},
                             {"mu", finite_or_string(profile.inter.mu[i][off])},
                             {"witness", profile.inter.witness[i][off]}});
        }
    }
    j["interlayer_cushion"] = std::move(inter);
    j["interlayer_skipped"] = profile.inter.skipped;
    j["mu_min"] = profile.inter.mu_min;
    j["activation_contraction"] = {{"c", finite_or_string(profile.contraction.c)},
                                   {"witness_sample", profile.contraction.witness_sample},
                                   {"witness_layer", profile.contraction.witness_layer},
                                   {"degenerate", profile.contraction.degenerate}};
    j["smoothness_rho"] = finite_or_string(profile.smoothness_rho);
    j["smoothness_estimated"] = profile.smoothness_estimated;
    return j;
}

void save_cushion_profile(const CushionProfile& profile, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for write");
    out << cushion_profile_json(profile).dump(2) << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace mdn
