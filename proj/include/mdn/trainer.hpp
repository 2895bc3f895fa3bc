#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mdn/bounds.hpp"
#include "mdn/dataset.hpp"
#include "mdn/margin.hpp"
#include "mdn/network.hpp"

namespace mdn {

struct TrainConfig {
    LossConfig loss;
    std::vector<std::size_t> layer_dims;
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 1;
    std::size_t telemetry_every = 1;

    // theta := theta_scale_a * sqrt(Var) recomputed on the training set at
    // epoch start (clamped into (0, r)); off by default.
    bool adaptive_theta = false;

    // Attach cushion/bound telemetry at each telemetry epoch (slow).
    bool telemetry_bounds = false;

    void validate(const Dataset& train_data) const;
};

struct TelemetryRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double eval_accuracy = 0.0;
    MarginStats margins;
    std::optional<BoundReport> bounds;
};

struct TrainHistory {
    std::vector<TelemetryRecord> records;
};

struct EvalResult {
    double accuracy = 0.0;
    MarginStats margins;
};

EvalResult evaluate(const NetworkParams& params, const Dataset& data);

// Seeded mini-batch SGD with momentum (v <- momentum*v - lr*g, w <- w + v);
// gradients averaged over the batch; bit-reproducible given (config, data).
// Aborts with a diagnostic naming the epoch and batch if the loss goes
// non-finite.
std::pair<NetworkParams, TrainHistory> train(const TrainConfig& cfg, const Dataset& train_data,
                                             const Dataset& eval_data);

struct GridRow {
    double r = 0.0;
    double theta = 0.0;
    double eta = 0.0;
    bool valid = false;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct GridSearchResult {
    TrainConfig best;
    std::vector<GridRow> table;
    std::size_t best_index = 0;
};

// Trains every (r, theta, eta) combination on train-minus-holdout and picks
// the best validation accuracy (first in grid order on ties). Combinations
// violating r > theta > 0 are marked invalid in the table and skipped.
GridSearchResult grid_search(const TrainConfig& base, const std::vector<double>& r_values,
                             const std::vector<double>& theta_values,
                             const std::vector<double>& eta_values, const Dataset& train_data,
                             std::size_t val_holdout);

void write_history_csv(const TrainHistory& history, const std::string& path);
nlohmann::json history_json(const TrainHistory& history);

}  // namespace mdn
