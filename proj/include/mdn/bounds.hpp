#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdn/cushion.hpp"
#include "mdn/dataset.hpp"
#include "mdn/margin.hpp"
#include "mdn/network.hpp"

namespace mdn {

// Scalar margin surrogate for the prior bounds. The minimum margin of an
// imperfectly fit net is often <= 0, which would make every prior bound
// undefined, so the default policy is the 5th percentile; both policies clamp
// below at 1e-6.
enum class GammaPolicy { minimum, percentile };

double reference_margin(const std::vector<double>& margins, GammaPolicy policy,
                        double percentile_p = 5.0);

struct LayerNormSet {
    double spectral = 0.0;
    double frobenius = 0.0;
    double two_one = 0.0;
    double one_two = 0.0;
    double one_inf = 0.0;
};

// The five named capacity terms plus the two raw spectral-norm terms.
// Products over layers accumulate in log space; overflow surfaces as +inf.
struct PriorTerms {
    double l1_inf = 0.0;       // (1/g^2) prod ||W||_{1,inf}
    double frobenius = 0.0;    // (1/g^2) prod ||W||_F^2
    double spec_l12 = 0.0;     // (1/g^2) prod ||W||_2^2 * sum ||W||_{1,2}^2/||W||_2^2
    double spec_fro = 0.0;     // (rho/g^2) prod ||W||_2^2 * sum ||W||_F^2/||W||_2^2
    double compression = 0.0;  // (max_x ||f(x)||^2/g^2) * sum 1/(mu_i^2 mu_{i->}^2)
    double r_bartlett = 0.0;   // prod ||W||_2 * (sum (||W||_{2,1}/||W||_2)^{2/3})^{3/2}
    double r_neyshabur = 0.0;  // sqrt(rho) d prod ||W||_2 * (sum ||W||_F^2/||W||_2^2)^{1/2}
};

PriorTerms prior_bound_terms(const NetworkParams& params, const Dataset& data, double gamma_ref,
                             const CushionProfile& cushions);

// Theorem-form margin-ratio capacity:
//   Lambda = ((1+lambda)/(1-lambda)) * sqrt(sum_i c^2 d / (mu_i^2 mu_{i->}^2)).
// Throws when lambda >= 1.
double mdnet_capacity(double lambda, double c, int d, const CushionProfile& cushions);

// Figure-form variant without the c^2 d factor:
//   ((1+lambda)^2/(1-lambda)^2) * sum_i 1/(mu_i^2 mu_{i->}^2).
double mdnet_ratio_term(double lambda, const CushionProfile& cushions);

// sqrt((capacity^2 + ln(d m / delta)) / m), hidden constant fixed to 1.
double theorem1_gap(double capacity_sq, int d, std::size_t m, double delta);

struct BoundConfig {
    GammaPolicy policy = GammaPolicy::percentile;
    double percentile_p = 5.0;
    double delta = 0.1;
};

struct BoundReport {
    double gamma_ref = 0.0;
    PriorTerms terms;
    double mdnet_ratio = 0.0;        // figure form
    double capacity_theorem = 0.0;   // theorem form
    double gap = 0.0;                // theorem-1 gap from the theorem-form capacity
    bool mdnet_valid = false;        // lambda < 1

    // Inputs digest.
    double lambda = 0.0;
    double margin_mean_r = 0.0;
    double margin_var_theta2 = 0.0;
    double contraction_c = 1.0;
    int d = 0;
    std::size_t m = 0;
    double delta = 0.1;
    std::size_t rho = 0;
    double max_output_norm = 0.0;
    double cushion_sum = 0.0;        // sum_i 1/(mu_i^2 mu_{i->}^2)
    double vc_order = 0.0;           // rho^2 d^2, reported as a metadata constant only
    std::vector<LayerNormSet> layer_norms;
};

BoundReport compute_bound_report(const NetworkParams& params, const Dataset& data,
                                 const MarginStats& stats, const CushionProfile& cushions,
                                 const BoundConfig& config = {});

nlohmann::json bound_report_json(const BoundReport& report);
std::string bound_report_csv_header();
std::string bound_report_csv_row(const std::string& label, const BoundReport& report);

}  // namespace mdn
