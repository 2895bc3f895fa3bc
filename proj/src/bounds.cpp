#include "mdn/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mdn/norms.hpp"

namespace mdn {

namespace {

constexpr double kGammaFloor = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

double cushion_error_sum(const CushionProfile& cushions) {
    double sum = 0.0;
    for (int i = 0; i < cushions.depth; ++i) {
        const double mu = cushions.layer.mu[i];
        const double mu_min = cushions.inter.mu_min[i];
        sum += 1.0 / (mu * mu * mu_min * mu_min);
    }
    return sum;
}

nlohmann::json json_num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

double reference_margin(const std::vector<double>& margins, GammaPolicy policy,
                        double percentile_p) {
    if (margins.empty()) throw std::invalid_argument("reference_margin: empty margins");
    double g;
    if (policy == GammaPolicy::minimum) {
        g = *std::min_element(margins.begin(), margins.end());
    } else {
        if (!(percentile_p >= 0.0 && percentile_p <= 100.0)) {
            throw std::invalid_argument("reference_margin: percentile out of [0,100]");
        }
        std::vector<double> sorted = margins;
        std::sort(sorted.begin(), sorted.end());
        // nearest-rank percentile
        std::size_t rank = static_cast<std::size_t>(
            std::ceil(percentile_p / 100.0 * static_cast<double>(sorted.size())));
        if (rank == 0) rank = 1;
        if (rank > sorted.size()) rank = sorted.size();
        g = sorted[rank - 1];
    }
    return std::max(g, kGammaFloor);
}

PriorTerms prior_bound_terms(const NetworkParams& params, const Dataset& data, double gamma_ref,
                             const CushionProfile& cushions) {
    if (!(gamma_ref > 0.0)) throw std::invalid_argument("prior_bound_terms: gamma_ref must be > 0");
    if (cushions.depth != params.depth()) {
        throw std::invalid_argument("prior_bound_terms: cushion profile depth mismatch");
    }
    const int d = params.depth();
    const double rho = static_cast<double>(params.max_width());

    double log_prod_spec = 0.0;   // sum log ||W||_2
    double log_prod_fro2 = 0.0;   // sum log ||W||_F^2
    double log_prod_l1inf = 0.0;  // sum log ||W||_{1,inf}
    double sum_l12 = 0.0;         // sum ||W||_{1,2}^2 / ||W||_2^2
    double sum_fro = 0.0;         // sum ||W||_F^2 / ||W||_2^2
    double sum_b21 = 0.0;         // sum (||W||_{2,1}/||W||_2)^{2/3}
    for (int i = 0; i < d; ++i) {
        const DenseMatrix& w = params.weights[i];
        const double spec = matrix_norm(w, MatrixNorm::spectral);
        const double fro = matrix_norm(w, MatrixNorm::frobenius);
        const double n12 = matrix_norm(w, MatrixNorm::one_two);
        const double n21 = matrix_norm(w, MatrixNorm::two_one);
        const double n1inf = matrix_norm(w, MatrixNorm::one_inf);
        log_prod_spec += std::log(spec);
        log_prod_fro2 += 2.0 * std::log(fro);
        log_prod_l1inf += std::log(n1inf);
        sum_l12 += (n12 * n12) / (spec * spec);
        sum_fro += (fro * fro) / (spec * spec);
        sum_b21 += std::pow(n21 / spec, 2.0 / 3.0);
    }

    double max_out_sq = 0.0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const ForwardTrace trace = forward(params, data.features[s]);
        const double n = norm2(trace.scores());
        max_out_sq = std::max(max_out_sq, n * n);
    }

    const double log_g2 = 2.0 * std::log(gamma_ref);
    PriorTerms t;
    t.l1_inf = std::exp(log_prod_l1inf - log_g2);
    t.frobenius = std::exp(log_prod_fro2 - log_g2);
    t.spec_l12 = std::exp(2.0 * log_prod_spec - log_g2 + std::log(sum_l12));
    t.spec_fro = std::exp(std::log(rho) + 2.0 * log_prod_spec - log_g2 + std::log(sum_fro));
    t.compression = (max_out_sq / (gamma_ref * gamma_ref)) * cushion_error_sum(cushions);
    t.r_bartlett = std::exp(log_prod_spec + 1.5 * std::log(sum_b21));
    t.r_neyshabur = std::exp(0.5 * std::log(rho) + std::log(static_cast<double>(d)) +
                             log_prod_spec + 0.5 * std::log(sum_fro));
    return t;
}

double mdnet_capacity(double lambda, double c, int d, const CushionProfile& cushions) {
    if (!(lambda >= 0.0 && lambda < 1.0)) {
        throw std::domain_error("mdnet_capacity: margin ratio must satisfy 0 <= lambda < 1");
    }
    const double sum = cushion_error_sum(cushions);
    return (1.0 + lambda) / (1.0 - lambda) *
           std::sqrt(c * c * static_cast<double>(d) * sum);
}

double mdnet_ratio_term(double lambda, const CushionProfile& cushions) {
    if (!(lambda >= 0.0 && lambda < 1.0)) {
        throw std::domain_error("mdnet_ratio_term: margin ratio must satisfy 0 <= lambda < 1");
    }
    const double f = (1.0 + lambda) / (1.0 - lambda);
    return f * f * cushion_error_sum(cushions);
}

double theorem1_gap(double capacity_sq, int d, std::size_t m, double delta) {
    if (m < 2) throw std::invalid_argument("theorem1_gap: m must be >= 2");
    if (!(delta > 0.0 && delta <= 1.0)) {
        throw std::invalid_argument("theorem1_gap: delta must be in (0, 1]");
    }
    if (!(capacity_sq >= 0.0)) throw std::invalid_argument("theorem1_gap: capacity_sq must be >= 0");
    const double md = static_cast<double>(m);
    return std::sqrt((capacity_sq + std::log(static_cast<double>(d) * md / delta)) / md);
}

BoundReport compute_bound_report(const NetworkParams& params, const Dataset& data,
                                 const MarginStats& stats, const CushionProfile& cushions,
                                 const BoundConfig& config) {
    BoundReport report;
    report.d = params.depth();
    report.m = data.size();
    report.delta = config.delta;
    report.rho = params.max_width();
    report.vc_order = static_cast<double>(report.rho) * static_cast<double>(report.rho) *
                      static_cast<double>(report.d) * static_cast<double>(report.d);
    report.lambda = stats.ratio_lambda;
    report.margin_mean_r = stats.mean_r;
    report.margin_var_theta2 = stats.var_theta2;
    report.contraction_c = cushions.contraction.c;
    report.cushion_sum = cushion_error_sum(cushions);
    report.gamma_ref = reference_margin(stats.margins, config.policy, config.percentile_p);

    report.terms = prior_bound_terms(params, data, report.gamma_ref, cushions);
    double max_out = 0.0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        max_out = std::max(max_out, norm2(forward(params, data.features[s]).scores()));
    }
    report.max_output_norm = max_out;

    for (const auto& w : params.weights) {
        LayerNormSet n;
        n.spectral = matrix_norm(w, MatrixNorm::spectral);
        n.frobenius = matrix_norm(w, MatrixNorm::frobenius);
        n.two_one = matrix_norm(w, MatrixNorm::two_one);
        n.one_two = matrix_norm(w, MatrixNorm::one_two);
        n.one_inf = matrix_norm(w, MatrixNorm::one_inf);
        report.layer_norms.push_back(n);
    }

    report.mdnet_valid = stats.valid && stats.ratio_lambda < 1.0;
    if (report.mdnet_valid) {
        report.mdnet_ratio = mdnet_ratio_term(stats.ratio_lambda, cushions);
        report.capacity_theorem =
            mdnet_capacity(stats.ratio_lambda, cushions.contraction.c, report.d, cushions);
        report.gap = theorem1_gap(report.capacity_theorem * report.capacity_theorem, report.d,
                                  report.m, config.delta);
    } else {
        report.mdnet_ratio = kInf;
        report.capacity_theorem = kInf;
        report.gap = kInf;
    }
    return report;
}

nlohmann::json bound_report_json(const BoundReport& r) {
    nlohmann::json j;
    j["gamma_ref"] = r.gamma_ref;
    j["terms"] = {{"l1_inf", json_num(r.terms.l1_inf)},
                  {"frobenius", json_num(r.terms.frobenius)},
                  {"spec_l12", json_num(r.terms.spec_l12)},
                  {"spec_fro", json_num(r.terms.spec_fro)},
                  {"compression", json_num(r.terms.compression)},
                  {"mdnet_ratio", json_num(r.mdnet_ratio)},
                  {"R_bartlett", json_num(r.terms.r_bartlett)},
                  {"R_neyshabur", json_num(r.terms.r_neyshabur)}};
    j["mdnet"] = {{"figure_form", json_num(r.mdnet_ratio)},
                  {"theorem_form", json_num(r.capacity_theorem)},
                  {"valid", r.mdnet_valid}};
    j["theorem1_gap"] = json_num(r.gap);
    j["inputs"] = {{"lambda", json_num(r.lambda)},
                   {"r", r.margin_mean_r},
                   {"theta2", r.margin_var_theta2},
                   {"c", json_num(r.contraction_c)},
                   {"d", r.d},
                   {"m", r.m},
                   {"delta", r.delta},
                   {"rho", r.rho},
                   {"max_output_norm", r.max_output_norm},
                   {"cushion_sum", json_num(r.cushion_sum)}};
    j["metadata"] = {{"hidden_constants", 1},
                     {"vc_order_rho2d2", r.vc_order}};
    nlohmann::json norms = nlohmann::json::array();
    for (const auto& n : r.layer_norms) {
        norms.push_back({{"spectral", n.spectral},
                         {"frobenius", n.frobenius},
                         {"two_one", n.two_one},
                         {"one_two", n.one_two},
                         {"one_inf", n.one_inf}});
    }
    j["layer_norms"] = std::move(norms);
    return j;
}

std::string bound_report_csv_header() {
    return "label,gamma_ref,lambda,r,theta2,c,d,m,delta,rho,l1_inf,frobenius,spec_l12,spec_fro,"
           "compression,mdnet_ratio,R_bartlett,R_neyshabur,capacity_theorem,theorem1_gap,"
           "max_output_norm,cushion_sum,vc_order,mdnet_valid";
}

std::string bound_report_csv_row(const std::string& label, const BoundReport& r) {
    std::ostringstream out;
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
    };
    out << label;
    put(r.gamma_ref);
    put(r.lambda);
    put(r.margin_mean_r);
    put(r.margin_var_theta2);
    put(r.contraction_c);
    out << ',' << r.d << ',' << r.m;
    put(r.delta);
    out << ',' << r.rho;
    put(r.terms.l1_inf);
    put(r.terms.frobenius);
    put(r.terms.spec_l12);
    put(r.terms.spec_fro);
    put(r.terms.compression);
    put(r.mdnet_ratio);
    put(r.terms.r_bartlett);
    put(r.terms.r_neyshabur);
    put(r.capacity_theorem);
    put(r.gap);
    put(r.max_output_norm);
    put(r.cushion_sum);
    put(r.vc_order);
    out << ',' << (r.mdnet_valid ? 1 : 0);
    return out.str();
}

}  // namespace mdn
