#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdn/matrix.hpp"

namespace mdn {

// Bias-free ReLU feed-forward net: scores(x) = W_d relu(W_{d-1} ... relu(W_1 x)).
// Weights are immutable after construction and shareable across threads.
struct NetworkParams {
    std::vector<DenseMatrix> weights;  // W_1..W_d

    NetworkParams() = default;
    explicit NetworkParams(std::vector<DenseMatrix> w);

    int depth() const { return static_cast<int>(weights.size()); }
    std::size_t input_dim() const { return weights.front().cols(); }
    std::size_t output_dim() const { return weights.back().rows(); }

    // Max output units over layers.
    std::size_t max_width() const;

    void validate() const;  // throws on broken layer chaining
};

// Per-layer activations for one input. preacts holds x^1..x^d; postacts holds
// relu(x^1)..relu(x^{d-1}); masks record which units were active (strictly
// positive pre-activation) at layers 1..d-1.
struct ForwardTrace {
    DenseVector input;
    std::vector<DenseVector> preacts;
    std::vector<DenseVector> postacts;
    std::vector<std::vector<std::uint8_t>> masks;

    ForwardTrace() : input(1) {}

    const DenseVector& scores() const { return preacts.back(); }

    // relu(x^{i-1}) with 1-indexed i; relu applied to the raw input is the
    // identity (layer recursion starts at x^1 = W_1 x).
    const DenseVector& layer_input(int i) const {
        return i == 1 ? input : postacts[static_cast<std::size_t>(i) - 2];
    }
};

struct GradientSet {
    std::vector<DenseMatrix> layers;  // dLoss/dW_i, shapes match NetworkParams
};

ForwardTrace forward(const NetworkParams& params, const DenseVector& x);

// Exact Jacobian of the map from layer-i output to layer-j output at the
// trace's activation pattern (1 <= i <= j <= d); i == j yields the identity.
// Piecewise linearity of bias-free ReLU nets makes J x^i = x^j hold exactly.
DenseMatrix jacobian_between(const NetworkParams& params, const ForwardTrace& trace, int i, int j);

// Reverse-mode gradients of a loss whose score-gradient is dscores, using the
// trace's fixed masks.
GradientSet backward(const NetworkParams& params, const ForwardTrace& trace,
                     const DenseVector& dscores);

// He-style init: entries N(0, 2/fan_in), deterministic per seed.
// layer_dims = [input, hidden..., output], at least 2 entries.
NetworkParams init_params(const std::vector<std::size_t>& layer_dims, std::uint64_t seed);

std::vector<std::size_t> layer_dims_of(const NetworkParams& params);

// JSON checkpoint, versioned; round-trips weights bit-exactly.
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

}  // namespace mdn
