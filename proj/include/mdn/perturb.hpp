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

// Empirical frequency of a fresh draw exceeding the max of m i.i.d. draws
// (standard Gaussian). Converges to 1/(m+1) for any continuous distribution.
double extreme_value_mc(std::size_t m, std::size_t trials, std::uint64_t seed);

// Noise scale from the margin statistics and cushion profile:
//   sigma = (r - theta) / (8 c d (r + theta) sqrt(sum_i 1/(mu_i^2 mu_{i->}^2))).
double sigma_from_margins(const MarginStats& stats, const CushionProfile& cushions, int d);

// Relative Gaussian weight noise: W_i + B_i * ||W_i||_F with B_i entries
// N(0, sigma^2). Deterministic per seed; sigma = 0 returns the params
// bit-exactly unchanged.
NetworkParams inject_noise(const NetworkParams& params, double sigma, std::uint64_t seed);

struct PerturbReport {
    double sigma = 0.0;
    std::size_t trials = 0;
    double threshold = 0.0;  // (r - theta) / 8
    double fraction_below_threshold = 0.0;

    // Statistics of per-trial max-over-dataset output deltas at sigma.
    double median = 0.0;
    double quantile_1_minus_delta = 0.0;  // delta fixed at 1/2
    double max = 0.0;

    // Scaling diagnostics: same noise directions evaluated at sigma/2 and
    // 2*sigma.
    double median_half_sigma = 0.0;
    double median_double_sigma = 0.0;

    std::vector<double> deltas;              // per trial, at sigma
    std::vector<double> deltas_half_sigma;   // per trial, at sigma/2
    std::vector<double> deltas_double_sigma; // per trial, at 2*sigma
};

// Runs `trials` noise draws at sigma from sigma_from_margins; each trial
// shares its noise direction across the three scales so the slope diagnostic
// is exact in the linear regime. A non-negative sigma_override replaces the
// computed sigma (sigma 0 short-circuits to all-zero deltas).
PerturbReport perturbation_experiment(const NetworkParams& params, const Dataset& data,
                                      const MarginStats& stats, const CushionProfile& cushions,
                                      std::size_t trials, std::uint64_t seed,
                                      double sigma_override = -1.0);

nlohmann::json perturb_report_json(const PerturbReport& report);
void write_perturb_trials_csv(const PerturbReport& report, const std::string& path);

}  // namespace mdn
