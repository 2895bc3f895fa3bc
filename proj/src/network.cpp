#include "mdn/network.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mdn/kernels.hpp"
#include "mdn/rng.hpp"

namespace mdn {

NetworkParams::NetworkParams(std::vector<DenseMatrix> w) : weights(std::move(w)) { validate(); }

void NetworkParams::validate() const {
    if (weights.empty()) throw std::invalid_argument("NetworkParams: no layers");
    for (std::size_t i = 1; i < weights.size(); ++i) {
        if (weights[i].cols() != weights[i - 1].rows()) {
            throw std::invalid_argument("NetworkParams: layer " + std::to_string(i + 1) +
                                        " input dim does not match layer " + std::to_string(i) +
                                        " output dim");
        }
    }
}

std::size_t NetworkParams::max_width() const {
    std::size_t rho = 0;
    for (const auto& w : weights) rho = std::max(rho, w.rows());
    return rho;
}

ForwardTrace forward(const NetworkParams& params, const DenseVector& x) {
    if (x.dim() != params.input_dim()) {
        throw std::invalid_argument("forward: input dim " + std::to_string(x.dim()) +
                                    " != expected " + std::to_string(params.input_dim()));
    }
    const auto& k = kernels::active();
    const int d = params.depth();

    ForwardTrace trace;
    trace.input = x;
    trace.preacts.reserve(d);
    trace.postacts.reserve(d > 0 ? d - 1 : 0);
    trace.masks.reserve(d > 0 ? d - 1 : 0);

    const DenseVector* cur = &x;
    for (int l = 0; l < d; ++l) {
        trace.preacts.push_back(matvec(params.weights[l], *cur));
        if (l + 1 < d) {
            const DenseVector& pre = trace.preacts.back();
            DenseVector post(pre.dim());
            k.relu(post.data(), pre.data(), pre.dim());
            std::vector<std::uint8_t> mask(pre.dim());
            for (std::size_t i = 0; i < pre.dim(); ++i) mask[i] = pre[i] > 0.0 ? 1 : 0;
            trace.postacts.push_back(std::move(post));
            trace.masks.push_back(std::move(mask));
            cur = &trace.postacts.back();
        }
    }
    return trace;
}

namespace {

// rows of m zeroed where mask is 0, i.e. D * m for D = diag(mask)
DenseMatrix mask_rows(const DenseMatrix& m, const std::vector<std::uint8_t>& mask) {
    DenseMatrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (!mask[i]) {
            double* row = out.row_ptr(i);
            for (std::size_t j = 0; j < m.cols(); ++j) row[j] = 0.0;
        }
    }
    return out;
}

// columns of m zeroed where mask is 0, i.e. m * D
DenseMatrix mask_cols(const DenseMatrix& m, const std::vector<std::uint8_t>& mask) {
    DenseMatrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* row = out.row_ptr(i);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (!mask[j]) row[j] = 0.0;
        }
    }
    return out;
}

}  // namespace

DenseMatrix jacobian_between(const NetworkParams& params, const ForwardTrace& trace, int i,
                             int j) {
    const int d = params.depth();
    if (i < 1 || j < i || j > d) {
        throw std::invalid_argument("jacobian_between: need 1 <= i <= j <= depth");
    }
    const std::size_t dim_i = params.weights[i - 1].rows();
    if (i == j) return DenseMatrix::identity(dim_i);

    // J = W_j D_{j-1} W_{j-1} ... W_{i+1} D_i, with D_l the mask at layer l.
    DenseMatrix jac = mask_cols(params.weights[i], trace.masks[i - 1]);  // W_{i+1} D_i
    for (int l = i + 2; l <= j; ++l) {
        jac = matmul(params.weights[l - 1], mask_rows(jac, trace.masks[l - 2]));
    }
    return jac;
}

GradientSet backward(const NetworkParams& params, const ForwardTrace& trace,
                     const DenseVector& dscores) {
    const int d = params.depth();
    if (dscores.dim() != params.output_dim()) {
        throw std::invalid_argument("backward: dscores dim mismatch");
    }

    GradientSet grads;
    grads.layers.reserve(d);
    for (const auto& w : params.weights) grads.layers.emplace_back(w.rows(), w.cols());

    DenseVector delta = dscores;
    for (int l = d; l >= 1; --l) {
        grads.layers[l - 1] = outer(delta, trace.layer_input(l));
        if (l > 1) {
            delta = matvec_transposed(params.weights[l - 1], delta);
            const auto& mask = trace.masks[l - 2];
            for (std::size_t u = 0; u < delta.dim(); ++u) {
                if (!mask[u]) delta[u] = 0.0;
            }
        }
    }
    return grads;
}

NetworkParams init_params(const std::vector<std::size_t>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) {
        throw std::invalid_argument("init_params: need at least input and output dims");
    }
    for (std::size_t dim : layer_dims) {
        if (dim == 0) throw std::invalid_argument("init_params: zero layer dim");
    }
    std::vector<DenseMatrix> weights;
    weights.reserve(layer_dims.size() - 1);
    for (std::size_t l = 1; l < layer_dims.size(); ++l) {
        const std::size_t fan_in = layer_dims[l - 1];
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        DenseMatrix w(layer_dims[l], fan_in);
        Rng rng(derive_seed(seed, l));
        rng.fill_gaussian(w.data(), w.size(), stddev);
        weights.push_back(std::move(w));
    }
    return NetworkParams(std::move(weights));
}

std::vector<std::size_t> layer_dims_of(const NetworkParams& params) {
    std::vector<std::size_t> dims;
    dims.push_back(params.input_dim());
    for (const auto& w : params.weights) dims.push_back(w.rows());
    return dims;
}

void save_checkpoint(const NetworkParams& params, const std::string& path) {
    nlohmann::json j;
    j["format"] = "mdn.checkpoint";
    j["version"] = 1;
    j["layer_dims"] = layer_dims_of(params);
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& w : params.weights) layers.push_back(w.values());
    j["weights"] = std::move(layers);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "mdn.checkpoint") {
        throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
    }
    if (j.value("version", 0) != 1) {
        throw std::runtime_error("load_checkpoint: unsupported version in " + path);
    }
    const auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
    const auto& layers = j.at("weights");
    if (dims.size() < 2 || layers.size() != dims.size() - 1) {
        throw std::runtime_error("load_checkpoint: inconsistent dims in " + path);
    }
    std::vector<DenseMatrix> weights;
    weights.reserve(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        weights.emplace_back(dims[l + 1], dims[l], layers[l].get<std::vector<double>>());
    }
    return NetworkParams(std::move(weights));
}

}  // namespace mdn
