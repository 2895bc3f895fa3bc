#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdn/dataset.hpp"
#include "mdn/network.hpp"

namespace mdn {

// The printed interlayer-cushion denominator is ||relu(x^{i-1})||; the
// upstream compression-framework form divides by ||x^i|| instead. Both are
// implemented; the printed form is the default.
enum class InterlayerDenom { postact_prev, layer_input };

struct LayerCushions {
    std::vector<double> mu;             // mu_i, one per layer
    std::vector<std::size_t> witness;   // sample index achieving each minimum
    std::size_t skipped = 0;            // zero-denominator samples skipped
};

struct InterlayerCushions {
    // mu[i-1][j-i] = mu_{i,j} for 1 <= i <= j <= d; mu_{i,i} uses J = identity.
    std::vector<std::vector<double>> mu;
    std::vector<std::vector<std::size_t>> witness;
    std::vector<double> mu_min;         // mu_{i->} = min(1/sqrt(rho), min_j mu_{i,j})
    double rho_cap = 0.0;               // 1/sqrt(rho)
    std::size_t skipped = 0;
};

struct ActivationContraction {
    double c = 1.0;
    std::size_t witness_sample = 0;
    int witness_layer = 0;              // 1-indexed; 0 when no hidden layers
    bool degenerate = false;            // some ratio was infinite (dead layer output)
};

LayerCushions layer_cushions(const NetworkParams& params, const Dataset& data);

InterlayerCushions interlayer_cushions(const NetworkParams& params, const Dataset& data,
                                       InterlayerDenom denom = InterlayerDenom::postact_prev);

ActivationContraction activation_contraction(const NetworkParams& params, const Dataset& data);

// Monte-Carlo estimate of the interlayer smoothness rho_delta at delta = 1/2:
// reciprocal of the median discrepancy ratio
//   ||M^{i,j}(x^i+eta) - J^{i,j}(x^i+eta)|| * ||x^i|| / (||eta|| * ||x^j||)
// pooled over samples, layer pairs i<j, and trials, with ||eta|| = sigma*||x^i||.
// Returns +infinity when every observed discrepancy is zero (purely linear
// regime around the data).
double interlayer_smoothness(const NetworkParams& params, const Dataset& data, double sigma,
                             std::size_t trials, std::uint64_t seed);

struct CushionOptions {
    InterlayerDenom denom = InterlayerDenom::postact_prev;
    std::size_t smoothness_trials = 0;  // 0 skips the smoothness estimate
    double smoothness_sigma = 1e-2;
    std::uint64_t seed = 1;
};

struct CushionProfile {
    int depth = 0;
    std::size_t rho = 0;
    LayerCushions layer;
    InterlayerCushions inter;
    ActivationContraction contraction;
    double smoothness_rho = 0.0;        // NaN when not estimated
    bool smoothness_estimated = false;
};

CushionProfile estimate_cushions(const NetworkParams& params, const Dataset& data,
                                 const CushionOptions& opts = {});

nlohmann::json cushion_profile_json(const CushionProfile& profile);
void save_cushion_profile(const CushionProfile& profile, const std::string& path);

}  // namespace mdn
