#include "mdn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "mdn/cushion.hpp"
#include "mdn/kernels.hpp"
#include "mdn/rng.hpp"

namespace mdn {

void TrainConfig::validate(const Dataset& train_data) const {
    loss.validate();
    if (layer_dims.size() < 2) throw std::invalid_argument("TrainConfig: need layer dims");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainConfig: negative learning rate");
    if (telemetry_every < 1) throw std::invalid_argument("TrainConfig: telemetry_every must be >= 1");
    if (train_data.size() == 0) throw std::invalid_argument("TrainConfig: empty training data");
    if (layer_dims.front() != train_data.feature_dim()) {
        throw std::invalid_argument("TrainConfig: input dim does not match data");
    }
    if (layer_dims.back() != static_cast<std::size_t>(train_data.num_classes)) {
        throw std::invalid_argument("TrainConfig: output dim does not match class count");
    }
}

EvalResult evaluate(const NetworkParams& params, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    std::vector<double> margins;
    margins.reserve(data.size());
    std::size_t correct = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const ForwardTrace trace = forward(params, data.features[s]);
        const DenseVector& scores = trace.scores();
        std::size_t pred = 0;
        for (std::size_t j = 1; j < scores.dim(); ++j) {
            if (scores[j] > scores[pred]) pred = j;
        }
        if (pred == static_cast<std::size_t>(data.labels[s])) ++correct;
        margins.push_back(margin(scores, data.labels[s]));
    }
    EvalResult out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    out.margins = margin_stats_from(std::move(margins));
    return out;
}

std::pair<NetworkParams, TrainHistory> train(const TrainConfig& cfg, const Dataset& train_data,
                                             const Dataset& eval_data) {
    cfg.validate(train_data);

    NetworkParams params = init_params(cfg.layer_dims, cfg.seed);
    std::vector<DenseMatrix> velocity;
    velocity.reserve(params.weights.size());
    for (const auto& w : params.weights) velocity.emplace_back(w.rows(), w.cols());

    const std::size_t m = train_data.size();
    std::vector<std::size_t> order(m);
    for (std::size_t s = 0; s < m; ++s) order[s] = s;

    LossConfig loss_cfg = cfg.loss;
    TrainHistory history;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.adaptive_theta && cfg.loss.variant == LossVariant::mdnet) {
            const MarginStats stats = margin_stats(params, train_data);
            double theta = cfg.loss.theta_scale_a * std::sqrt(stats.var_theta2);
            const double cap = 0.999 * loss_cfg.r;  // keep r > theta > 0 valid
            loss_cfg.theta = std::min(std::max(theta, 1e-12), cap);
        }

        Rng shuffle_rng(derive_seed(cfg.seed, 0x51u + epoch));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < m; start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(m, start + cfg.batch_size);
            const double batch_n = static_cast<double>(end - start);

            std::vector<DenseMatrix> grad_acc;
            grad_acc.reserve(params.weights.size());
            for (const auto& w : params.weights) grad_acc.emplace_back(w.rows(), w.cols());

            double batch_loss = 0.0;
            for (std::size_t p = start; p < end; ++p) {
                const std::size_t s = order[p];
                const ForwardTrace trace = forward(params, train_data.features[s]);
                const LossGrad lg =
                    loss_and_score_grad(trace.scores(), train_data.labels[s], loss_cfg);
                batch_loss += lg.loss;
                const GradientSet grads = backward(params, trace, lg.dscores);
                for (std::size_t l = 0; l < grad_acc.size(); ++l) {
                    kernels::active().axpy(grad_acc[l].data(), 1.0, grads.layers[l].data(),
                                           grad_acc[l].size());
                }
            }
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batch_index));
            }
            epoch_loss += batch_loss;

            const double inv_n = 1.0 / batch_n;
            for (std::size_t l = 0; l < params.weights.size(); ++l) {
                double* v = velocity[l].data();
                double* w = params.weights[l].data();
                const double* g = grad_acc[l].data();
                const std::size_t count = velocity[l].size();
                for (std::size_t i = 0; i < count; ++i) {
                    v[i] = cfg.momentum * v[i] - cfg.learning_rate * (g[i] * inv_n);
                    w[i] += v[i];
                }
            }
        }

        if (epoch % cfg.telemetry_every == 0 || epoch == cfg.epochs) {
            TelemetryRecord rec;
            rec.epoch = epoch;
            rec.train_loss = epoch_loss / static_cast<double>(m);
            const EvalResult train_eval = evaluate(params, train_data);
            rec.train_accuracy = train_eval.accuracy;
            rec.margins = train_eval.margins;
            rec.eval_accuracy = eval_data.size() > 0 ? evaluate(params, eval_data).accuracy : 0.0;
            if (cfg.telemetry_bounds) {
                const CushionProfile cushions = estimate_cushions(params, train_data);
                rec.bounds = compute_bound_report(params, train_data, rec.margins, cushions);
            }
            if (!history.records.empty() && history.records.back().epoch == epoch) {
                history.records.back() = std::move(rec);
            } else {
                history.records.push_back(std::move(rec));
            }
        }
    }
    return {std::move(params), std::move(history)};
}

GridSearchResult grid_search(const TrainConfig& base, const std::vector<double>& r_values,
                             const std::vector<double>& theta_values,
                             const std::vector<double>& eta_values, const Dataset& train_data,
                             std::size_t val_holdout) {
    if (r_values.empty() || theta_values.empty() || eta_values.empty()) {
        throw std::invalid_argument("grid_search: empty grid");
    }
    const auto [fit_data, val_data] = split_holdout(train_data, val_holdout, base.seed);
    if (val_data.size() == 0) throw std::invalid_argument("grid_search: empty validation split");

    GridSearchResult result;
    result.best = base;
    bool have_best = false;
    double best_acc = -1.0;

    for (double r : r_values) {
        for (double theta : theta_values) {
            for (double eta : eta_values) {
                GridRow row;
                row.r = r;
                row.theta = theta;
                row.eta = eta;
                row.valid = r > theta && theta > 0.0 && eta >= 0.0;
                if (row.valid) {
                    TrainConfig cfg = base;
                    cfg.loss.variant = LossVariant::mdnet;
                    cfg.loss.r = r;
                    cfg.loss.theta = theta;
                    cfg.loss.eta = eta;
                    try {
                        auto [params, history] = train(cfg, fit_data, val_data);
                        row.train_accuracy = history.records.back().train_accuracy;
                        row.val_accuracy = history.records.back().eval_accuracy;
                    } catch (const std::exception& e) {
                        throw std::runtime_error("grid_search: training failed for r=" +
                                                 std::to_string(r) + " theta=" +
                                                 std::to_string(theta) + " eta=" +
                                                 std::to_string(eta) + ": " + e.what());
                    }
                    if (!have_best || row.val_accuracy > best_acc) {
                        have_best = true;
                        best_acc = row.val_accuracy;
                        result.best.loss.variant = LossVariant::mdnet;
                        result.best.loss.r = r;
                        result.best.loss.theta = theta;
                        result.best.loss.eta = eta;
                        result.best_index = result.table.size();
                    }
                }
                result.table.push_back(row);
            }
        }
    }
    if (!have_best) throw std::invalid_argument("grid_search: no valid grid combination");
    return result;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for write");
    out << "epoch,train_loss,train_accuracy,eval_accuracy,margin_mean,margin_var,margin_lambda\n";
    char buf[32];
    for (const auto& rec : history.records) {
        out << rec.epoch;
        for (double v : {rec.train_loss, rec.train_accuracy, rec.eval_accuracy,
                         rec.margins.mean_r, rec.margins.var_theta2, rec.margins.ratio_lambda}) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

nlohmann::json history_json(const TrainHistory& history) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : history.records) {
        nlohmann::json j;
        j["epoch"] = rec.epoch;
        j["train_loss"] = rec.train_loss;
        j["train_accuracy"] = rec.train_accuracy;
        j["eval_accuracy"] = rec.eval_accuracy;
        j["margin"] = {{"mean", rec.margins.mean_r},
                       {"var", rec.margins.var_theta2},
                       {"lambda", std::isfinite(rec.margins.ratio_lambda)
                                      ? nlohmann::json(rec.margins.ratio_lambda)
                                      : nlohmann::json("inf")},
                       {"valid", rec.margins.valid}};
        if (rec.bounds) j["bounds"] = bound_report_json(*rec.bounds);
        records.push_back(std::move(j));
    }
    return {{"records", std::move(records)}};
}

}  // namespace mdn
