#include "mdn/margin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mdn {

namespace {

// Index of the maximal competitor (j != label), lowest index on ties.
std::size_t best_competitor(const DenseVector& scores, int label) {
    std::size_t best = label == 0 ? 1 : 0;
    for (std::size_t j = 0; j < scores.dim(); ++j) {
        if (j == static_cast<std::size_t>(label)) continue;
        if (scores[j] > scores[best]) best = j;
    }
    return best;
}

double stable_softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

double margin(const DenseVector& scores, int label) {
    if (scores.dim() < 2) throw std::invalid_argument("margin: need at least 2 classes");
    if (label < 0 || static_cast<std::size_t>(label) >= scores.dim()) {
        throw std::invalid_argument("margin: label out of range");
    }
    return scores[label] - scores[best_competitor(scores, label)];
}

MarginStats margin_stats_from(std::vector<double> margins) {
    if (margins.empty()) throw std::invalid_argument("margin_stats: empty margins");
    const double m = static_cast<double>(margins.size());
    double mean = 0.0;
    for (double g : margins) mean += g;
    mean /= m;
    double var = 0.0;
    for (double g : margins) var += (g - mean) * (g - mean);
    var /= m;

    MarginStats stats;
    stats.margins = std::move(margins);
    stats.mean_r = mean;
    stats.var_theta2 = var;
    if (mean > 0.0) {
        stats.ratio_lambda = std::sqrt(var) / mean;
        stats.valid = stats.ratio_lambda < 1.0;
    } else {
        stats.ratio_lambda = std::numeric_limits<double>::infinity();
        stats.valid = false;
    }
    return stats;
}

MarginStats margin_stats(const NetworkParams& params, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("margin_stats: empty dataset");
    std::vector<double> margins;
    margins.reserve(data.size());
    for (std::size_t s = 0; s < data.size(); ++s) {
        const ForwardTrace trace = forward(params, data.features[s]);
        margins.push_back(margin(trace.scores(), data.labels[s]));
    }
    return margin_stats_from(std::move(margins));
}

std::string loss_variant_name(LossVariant v) {
    switch (v) {
        case LossVariant::mdnet: return "mdnet";
        case LossVariant::cross_entropy: return "cross_entropy";
        case LossVariant::hinge: return "hinge";
        case LossVariant::soft_hinge: return "soft_hinge";
    }
    return "unknown";
}

LossVariant loss_variant_from_name(const std::string& name) {
    if (name == "mdnet") return LossVariant::mdnet;
    if (name == "cross_entropy" || name == "xent") return LossVariant::cross_entropy;
    if (name == "hinge") return LossVariant::hinge;
    if (name == "soft_hinge") return LossVariant::soft_hinge;
    throw std::invalid_argument("unknown loss variant: " + name);
}

void LossConfig::validate() const {
    if (variant == LossVariant::mdnet) {
        if (!(r > theta && theta > 0.0)) {
            throw std::invalid_argument("LossConfig: mdnet requires r > theta > 0");
        }
        if (!(eta >= 0.0)) throw std::invalid_argument("LossConfig: eta must be >= 0");
    }
    if (variant == LossVariant::hinge || variant == LossVariant::soft_hinge) {
        if (!(hinge_margin > 0.0)) {
            throw std::invalid_argument("LossConfig: hinge_margin must be > 0");
        }
    }
    if (!(theta_scale_a > 0.0)) {
        throw std::invalid_argument("LossConfig: theta_scale_a must be > 0");
    }
}

double mdnet_loss(double gamma, const LossConfig& cfg) {
    LossConfig check = cfg;
    check.variant = LossVariant::mdnet;
    check.validate();
    const double lo = cfg.r - cfg.theta;
    const double hi = cfg.r + cfg.theta;
    if (gamma <= lo) {
        const double t = lo - gamma;
        return (t * t) / (lo * lo);
    }
    if (gamma <= hi) return 0.0;
    const double t = gamma - hi;
    return cfg.eta * (t * t) / (hi * hi);
}

LossGrad loss_and_score_grad(const DenseVector& scores, int label, const LossConfig& cfg) {
    if (label < 0 || static_cast<std::size_t>(label) >= scores.dim()) {
        throw std::invalid_argument("loss_and_score_grad: label out of range");
    }
    cfg.validate();

    LossGrad out;
    out.dscores = DenseVector(scores.dim());

    if (cfg.variant == LossVariant::cross_entropy) {
        double max_s = scores[0];
        for (std::size_t j = 1; j < scores.dim(); ++j) max_s = std::max(max_s, scores[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < scores.dim(); ++j) sum += std::exp(scores[j] - max_s);
        out.loss = -(scores[label] - max_s - std::log(sum));
        for (std::size_t j = 0; j < scores.dim(); ++j) {
            out.dscores[j] = std::exp(scores[j] - max_s) / sum;
        }
        out.dscores[label] -= 1.0;
        return out;
    }

    const std::size_t jstar = best_competitor(scores, label);
    const double gamma = scores[label] - scores[jstar];
    double dldg = 0.0;
    switch (cfg.variant) {
        case LossVariant::mdnet: {
            const double lo = cfg.r - cfg.theta;
            const double hi = cfg.r + cfg.theta;
            out.loss = mdnet_loss(gamma, cfg);
            if (gamma <= lo) {
                dldg = -2.0 * (lo - gamma) / (lo * lo);
            } else if (gamma > hi) {
                dldg = 2.0 * cfg.eta * (gamma - hi) / (hi * hi);
            }
            break;
        }
        case LossVariant::hinge: {
            const double z = cfg.hinge_margin - gamma;
            out.loss = std::max(0.0, z);
            dldg = z > 0.0 ? -1.0 : 0.0;
            break;
        }
        case LossVariant::soft_hinge: {
            const double z = cfg.hinge_margin - gamma;
            out.loss = stable_softplus(z);
            dldg = -1.0 / (1.0 + std::exp(-z));
            break;
        }
        case LossVariant::cross_entropy:
            break;  // handled above
    }
    out.dscores[label] = dldg;
    out.dscores[jstar] = -dldg;
    return out;
}

double band_loss_empirical(const std::vector<double>& margins, double r, double theta) {
    if (margins.empty()) throw std::invalid_argument("band_loss_empirical: empty margins");
    if (!(r > theta && theta > 0.0)) {
        throw std::invalid_argument("band_loss_empirical: need r > theta > 0");
    }
    std::size_t below = 0;
    std::size_t above = 0;
    for (double g : margins) {
        if (g <= r - theta) ++below;
        else if (g > r + theta) ++above;
    }
    return static_cast<double>(below + above) / static_cast<double>(margins.size());
}

ScatterDecomposition scatter_ratio(double between_se, double within_sa) {
    ScatterDecomposition out;
    out.within_sa = within_sa;
    out.between_se = between_se;
    if (within_sa == 0.0) {
        out.infinite_ratio = true;
        out.ratio = std::numeric_limits<double>::infinity();
    } else {
        out.ratio = between_se / within_sa;
    }
    return out;
}

ScatterDecomposition variance_decomposition(const std::vector<DenseVector>& embeddings,
                                            const std::vector<int>& labels) {
    if (embeddings.empty() || embeddings.size() != labels.size()) {
        throw std::invalid_argument("variance_decomposition: bad inputs");
    }
    const std::size_t dim = embeddings.front().dim();
    int max_label = 0;
    for (int l : labels) {
        if (l < 0) throw std::invalid_argument("variance_decomposition: negative label");
        max_label = std::max(max_label, l);
    }
    const int k = max_label + 1;

    std::vector<std::vector<double>> class_mean(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> class_count(k, 0);
    std::vector<double> grand_mean(dim, 0.0);
    for (std::size_t s = 0; s < embeddings.size(); ++s) {
        if (embeddings[s].dim() != dim) {
            throw std::invalid_argument("variance_decomposition: inconsistent dims");
        }
        const int c = labels[s];
        ++class_count[c];
        for (std::size_t i = 0; i < dim; ++i) {
            class_mean[c][i] += embeddings[s][i];
            grand_mean[i] += embeddings[s][i];
        }
    }
    int present = 0;
    for (int c = 0; c < k; ++c) {
        if (class_count[c] > 0) {
            ++present;
            for (std::size_t i = 0; i < dim; ++i) class_mean[c][i] /= double(class_count[c]);
        }
    }
    if (present < 2) {
        throw std::invalid_argument("variance_decomposition: need at least 2 classes present");
    }
    for (std::size_t i = 0; i < dim; ++i) grand_mean[i] /= double(embeddings.size());

    double sa = 0.0;
    for (std::size_t s = 0; s < embeddings.size(); ++s) {
        const auto& mu = class_mean[labels[s]];
        for (std::size_t i = 0; i < dim; ++i) {
            const double t = embeddings[s][i] - mu[i];
            sa += t * t;
        }
    }
    double se = 0.0;
    for (int c = 0; c < k; ++c) {
        if (class_count[c] == 0) continue;
        double dist = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double t = class_mean[c][i] - grand_mean[i];
            dist += t * t;
        }
        se += double(class_count[c]) * dist;
    }
    return scatter_ratio(se, sa);
}

void write_margins_csv(const NetworkParams& params, const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for write");
    out << "sample_id,label,predicted,margin\n";
    char buf[32];
    for (std::size_t s = 0; s < data.size(); ++s) {
        const ForwardTrace trace = forward(params, data.features[s]);
        const DenseVector& scores = trace.scores();
        std::size_t pred = 0;
        for (std::size_t j = 1; j < scores.dim(); ++j) {
            if (scores[j] > scores[pred]) pred = j;
        }
        std::snprintf(buf, sizeof buf, "%.17g", margin(scores, data.labels[s]));
        out << s << ',' << data.labels[s] << ',' << pred << ',' << buf << '\n';
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace mdn
