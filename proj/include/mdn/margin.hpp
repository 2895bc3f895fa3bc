#pragma once

#include <string>
#include <vector>

#include "mdn/dataset.hpp"
#include "mdn/matrix.hpp"
#include "mdn/network.hpp"

namespace mdn {

// Multiclass margin: score of the labeled class minus the best competing
// score. Ties among competitors resolve by value (max is well-defined).
double margin(const DenseVector& scores, int label);

// First- and second-order statistics of the per-sample margin distribution.
// var_theta2 is the population variance (divide by m). The stats are flagged
// invalid when the mean is <= 0 or the std/mean ratio reaches 1.
struct MarginStats {
    std::vector<double> margins;
    double mean_r = 0.0;
    double var_theta2 = 0.0;
    double ratio_lambda = 0.0;
    bool valid = false;
};

MarginStats margin_stats_from(std::vector<double> margins);
MarginStats margin_stats(const NetworkParams& params, const Dataset& data);

enum class LossVariant { mdnet, cross_entropy, hinge, soft_hinge };

std::string loss_variant_name(LossVariant v);
LossVariant loss_variant_from_name(const std::string& name);

struct LossConfig {
    LossVariant variant = LossVariant::mdnet;
    double r = 2.0;             // target margin mean (mdnet)
    double theta = 0.5;         // zero-loss band half-width, 0 < theta < r (mdnet)
    double eta = 1.0;           // upper-deviation trade-off weight (mdnet)
    double hinge_margin = 1.0;  // hinge / soft_hinge target margin
    double theta_scale_a = 1.0; // adaptive mode: theta := a * sqrt(Var) per epoch

    void validate() const;  // throws on invalid combinations
};

// Piecewise-quadratic margin distribution loss:
//   gamma <= r-theta:           (r-theta-gamma)^2 / (r-theta)^2
//   r-theta < gamma <= r+theta: 0
//   gamma > r+theta:            eta * (gamma-r-theta)^2 / (r+theta)^2
double mdnet_loss(double gamma, const LossConfig& cfg);

struct LossGrad {
    double loss = 0.0;
    DenseVector dscores;
    LossGrad() : dscores(1) {}
};

// Loss value and dloss/dscores for one sample. Margin-based variants route
// dloss/dgamma as +1 to the labeled index and -1 to the single maximal
// competitor (lowest index on ties).
LossGrad loss_and_score_grad(const DenseVector& scores, int label, const LossConfig& cfg);

// Empirical (r,theta)-band loss: fraction of margins <= r-theta plus the
// fraction > r+theta.
double band_loss_empirical(const std::vector<double>& margins, double r, double theta);

// Classical within/between scatter traces over labeled embeddings:
//   S_A = sum_k sum_{x in k} ||z - mu_k||^2,  S_E = sum_k n_k ||mu_k - mu||^2.
// ratio = S_E / S_A; infinite_ratio is set when S_A == 0.
struct ScatterDecomposition {
    double within_sa = 0.0;
    double between_se = 0.0;
    double ratio = 0.0;
    bool infinite_ratio = false;
};

ScatterDecomposition variance_decomposition(const std::vector<DenseVector>& embeddings,
                                            const std::vector<int>& labels);

// The ratio path used by variance_decomposition, exposed for direct checks.
ScatterDecomposition scatter_ratio(double between_se, double within_sa);

// Per-sample margin dump: sample_id,label,predicted,margin.
void write_margins_csv(const NetworkParams& params, const Dataset& data, const std::string& path);

}  // namespace mdn
