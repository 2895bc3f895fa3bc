// Experiment CLI: train, bounds, small-sample, perturb, extreme, embed.
// Every command is a pure function of (flags, input files, seeds) to output
// bytes; a manifest (no timestamps) is written next to every output set, so
// reruns with equal inputs are byte-identical.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mdn/bounds.hpp"
#include "mdn/cushion.hpp"
#include "mdn/dataset.hpp"
#include "mdn/manifest.hpp"
#include "mdn/margin.hpp"
#include "mdn/network.hpp"
#include "mdn/perturb.hpp"
#include "mdn/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string g_out_dir;

std::string out_path(const std::string& name) {
    if (g_out_dir.empty() || g_out_dir == ".") return name;
    return g_out_dir + "/" + name;
}

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for write");
    out << text;
    if (!out) throw std::runtime_error(path + ": write failed");
}

void write_json(const std::string& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Shared dataset flags
// ---------------------------------------------------------------------------

struct DataOpts {
    std::string source = "synth";  // synth | idx
    std::string images;
    std::string labels;
    int synth_k = 4;
    std::size_t synth_dim = 16;
    std::size_t synth_per_class = 100;
    double synth_sep = 3.0;
    std::uint64_t synth_seed = 9;
    double fraction = 1.0;
    std::uint64_t subset_seed = 1;
    bool stratified = true;
};

void add_data_opts(CLI::App* cmd, DataOpts& d, bool with_fraction = true) {
    cmd->add_option("--data", d.source, "Dataset source: synth | idx")
        ->check(CLI::IsMember({"synth", "idx"}))
        ->capture_default_str();
    cmd->add_option("--images", d.images, "IDX image file (required for --data idx)");
    cmd->add_option("--labels", d.labels, "IDX label file (required for --data idx)");
    cmd->add_option("--synth-k", d.synth_k, "Synthetic class count")->capture_default_str();
    cmd->add_option("--synth-dim", d.synth_dim, "Synthetic feature dim")->capture_default_str();
    cmd->add_option("--synth-per-class", d.synth_per_class, "Synthetic samples per class")
        ->capture_default_str();
    cmd->add_option("--synth-sep", d.synth_sep, "Synthetic cluster separation")
        ->capture_default_str();
    cmd->add_option("--synth-seed", d.synth_seed, "Synthetic generator seed")
        ->capture_default_str();
    if (with_fraction) {
        cmd->add_option("--fraction", d.fraction, "Subset fraction in (0,1]")
            ->capture_default_str();
        cmd->add_option("--subset-seed", d.subset_seed, "Subset sampling seed")
            ->capture_default_str();
        cmd->add_flag("--stratified,!--no-stratified", d.stratified,
                      "Stratify the subset by class")
            ->capture_default_str();
    }
}

mdn::Dataset load_data(const DataOpts& d, mdn::RunManifest* manifest) {
    mdn::Dataset data;
    if (d.source == "idx") {
        if (d.images.empty() || d.labels.empty()) {
            throw CLI::ValidationError("--data idx requires --images and --labels");
        }
        data = mdn::load_idx(d.images, d.labels);
        if (manifest) {
            manifest->add_input(d.images);
            manifest->add_input(d.labels);
        }
    } else {
        data = mdn::synth_blobs(d.synth_k, d.synth_dim, d.synth_per_class, d.synth_sep,
                                d.synth_seed);
    }
    if (d.fraction < 1.0) {
        data = mdn::subset_fraction(data, d.fraction, d.subset_seed, d.stratified).data;
    }
    return data;
}

nlohmann::json data_opts_json(const DataOpts& d) {
    return {{"source", d.source},
            {"images", d.images},
            {"labels", d.labels},
            {"synth_k", d.synth_k},
            {"synth_dim", d.synth_dim},
            {"synth_per_class", d.synth_per_class},
            {"synth_sep", d.synth_sep},
            {"synth_seed", d.synth_seed},
            {"fraction", d.fraction},
            {"subset_seed", d.subset_seed},
            {"stratified", d.stratified}};
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    DataOpts data;
    std::string eval_images;
    std::string eval_labels;
    std::size_t eval_holdout = 0;
    std::string loss = "mdnet";
    double r = 2.0;
    double theta = 0.5;
    double eta = 1.0;
    double hinge_margin = 1.0;
    double theta_scale_a = 1.0;
    bool adaptive_theta = false;
    std::vector<std::size_t> layers;
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double lr = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 1;
    std::size_t telemetry_every = 1;
    bool telemetry_bounds = false;
    std::string tag = "train";
};

mdn::TrainConfig to_train_config(const TrainArgs& a) {
    mdn::TrainConfig cfg;
    cfg.loss.variant = mdn::loss_variant_from_name(a.loss);
    cfg.loss.r = a.r;
    cfg.loss.theta = a.theta;
    cfg.loss.eta = a.eta;
    cfg.loss.hinge_margin = a.hinge_margin;
    cfg.loss.theta_scale_a = a.theta_scale_a;
    cfg.adaptive_theta = a.adaptive_theta;
    cfg.layer_dims = a.layers;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.seed = a.seed;
    cfg.telemetry_every = a.telemetry_every;
    cfg.telemetry_bounds = a.telemetry_bounds;
    return cfg;
}

nlohmann::json train_args_json(const TrainArgs& a) {
    return {{"data", data_opts_json(a.data)},
            {"eval_images", a.eval_images},
            {"eval_labels", a.eval_labels},
            {"eval_holdout", a.eval_holdout},
            {"loss", a.loss},
            {"r", a.r},
            {"theta", a.theta},
            {"eta", a.eta},
            {"hinge_margin", a.hinge_margin},
            {"theta_scale_a", a.theta_scale_a},
            {"adaptive_theta", a.adaptive_theta},
            {"layers", a.layers},
            {"epochs", a.epochs},
            {"batch_size", a.batch_size},
            {"learning_rate", a.lr},
            {"momentum", a.momentum},
            {"seed", a.seed},
            {"telemetry_every", a.telemetry_every},
            {"telemetry_bounds", a.telemetry_bounds},
            {"tag", a.tag}};
}

void add_train_opts(CLI::App* cmd, TrainArgs& a) {
    add_data_opts(cmd, a.data);
    cmd->add_option("--eval-images", a.eval_images, "IDX images for evaluation");
    cmd->add_option("--eval-labels", a.eval_labels, "IDX labels for evaluation");
    cmd->add_option("--eval-holdout", a.eval_holdout,
                    "Hold out N training samples for evaluation")
        ->capture_default_str();
    cmd->add_option("--loss", a.loss, "mdnet | cross_entropy | hinge | soft_hinge")
        ->check(CLI::IsMember({"mdnet", "cross_entropy", "hinge", "soft_hinge"}))
        ->capture_default_str();
    cmd->add_option("--r", a.r, "Margin mean target (mdnet)")->capture_default_str();
    cmd->add_option("--theta", a.theta, "Band half-width (mdnet)")->capture_default_str();
    cmd->add_option("--eta", a.eta, "Upper-deviation weight (mdnet)")->capture_default_str();
    cmd->add_option("--hinge-margin", a.hinge_margin, "Hinge target margin")
        ->capture_default_str();
    cmd->add_option("--theta-scale-a", a.theta_scale_a, "Adaptive theta scale")
        ->capture_default_str();
    cmd->add_flag("--adaptive-theta", a.adaptive_theta,
                  "Recompute theta = a*sqrt(Var) each epoch");
    cmd->add_option("--layers", a.layers, "Layer dims, e.g. 784,256,256,10")
        ->required()
        ->delimiter(',');
    cmd->add_option("--epochs", a.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", a.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lr", a.lr, "Learning rate")->capture_default_str();
    cmd->add_option("--momentum", a.momentum, "SGD momentum")->capture_default_str();
    cmd->add_option("--seed", a.seed, "Master seed")->capture_default_str();
    cmd->add_option("--telemetry-every", a.telemetry_every, "Telemetry period (epochs)")
        ->capture_default_str();
    cmd->add_flag("--telemetry-bounds", a.telemetry_bounds,
                  "Attach bound reports to telemetry (slow)");
    cmd->add_option("--tag", a.tag, "Output file prefix")->capture_default_str();
}

int run_train(const TrainArgs& a) {
    mdn::RunManifest manifest;
    manifest.command = "train";
    manifest.options = train_args_json(a);
    manifest.seeds = {{"train", a.seed}, {"subset", a.data.subset_seed},
                      {"synth", a.data.synth_seed}};

    mdn::Dataset train_data = load_data(a.data, &manifest);
    mdn::Dataset eval_data;
    if (!a.eval_images.empty()) {
        if (a.eval_labels.empty()) throw CLI::ValidationError("--eval-images needs --eval-labels");
        eval_data = mdn::load_idx(a.eval_images, a.eval_labels);
        manifest.add_input(a.eval_images);
        manifest.add_input(a.eval_labels);
    } else if (a.eval_holdout > 0) {
        auto [rest, held] = mdn::split_holdout(train_data, a.eval_holdout, a.seed);
        train_data = std::move(rest);
        eval_data = std::move(held);
    } else {
        eval_data = train_data;  // documented: eval on train when nothing else given
    }

    const mdn::TrainConfig cfg = to_train_config(a);
    auto [params, history] = mdn::train(cfg, train_data, eval_data);

    const std::string ckpt = out_path(a.tag + "_checkpoint.json");
    const std::string hist_csv = out_path(a.tag + "_history.csv");
    const std::string hist_json = out_path(a.tag + "_history.json");
    const std::string margins_csv = out_path(a.tag + "_margins.csv");
    mdn::save_checkpoint(params, ckpt);
    mdn::write_history_csv(history, hist_csv);
    write_json(hist_json, mdn::history_json(history));
    mdn::write_margins_csv(params, train_data, margins_csv);

    manifest.outputs = {a.tag + "_checkpoint.json", a.tag + "_history.csv",
                        a.tag + "_history.json", a.tag + "_margins.csv"};
    manifest.save(out_path(a.tag + "_manifest.json"));

    const auto& last = history.records.back();
    std::cout << "train: " << train_data.size() << " samples, final train_acc "
              << fmt17(last.train_accuracy) << ", eval_acc " << fmt17(last.eval_accuracy)
              << "\n";
    std::cout << "wrote " << ckpt << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

struct BoundsArgs {
    std::vector<std::string> checkpoints;
    DataOpts data;
    std::string gamma_policy = "percentile";
    double gamma_percentile = 5.0;
    double delta = 0.1;
    std::size_t smoothness_trials = 0;
    double smoothness_sigma = 0.01;
    std::string interlayer_denom = "printed";
    std::uint64_t seed = 1;
    std::string tag = "bounds";
};

int run_bounds(const BoundsArgs& a) {
    mdn::RunManifest manifest;
    manifest.command = "bounds";
    manifest.options = {{"checkpoints", a.checkpoints},
                        {"data", data_opts_json(a.data)},
                        {"gamma_policy", a.gamma_policy},
                        {"gamma_percentile", a.gamma_percentile},
                        {"delta", a.delta},
                        {"smoothness_trials", a.smoothness_trials},
                        {"smoothness_sigma", a.smoothness_sigma},
                        {"interlayer_denom", a.interlayer_denom},
                        {"seed", a.seed},
                        {"tag", a.tag}};
    manifest.seeds = {{"seed", a.seed}};

    const mdn::Dataset data = load_data(a.data, &manifest);

    mdn::BoundConfig config;
    config.policy = a.gamma_policy == "minimum" ? mdn::GammaPolicy::minimum
                                                : mdn::GammaPolicy::percentile;
    config.percentile_p = a.gamma_percentile;
    config.delta = a.delta;

    mdn::CushionOptions copts;
    copts.denom = a.interlayer_denom == "input" ? mdn::InterlayerDenom::layer_input
                                                : mdn::InterlayerDenom::postact_prev;
    copts.smoothness_trials = a.smoothness_trials;
    copts.smoothness_sigma = a.smoothness_sigma;
    copts.seed = a.seed;

    std::string csv = mdn::bound_report_csv_header() + "\n";
    nlohmann::json reports = nlohmann::json::array();
    nlohmann::json profiles = nlohmann::json::array();
    for (const std::string& ckpt_path : a.checkpoints) {
        manifest.add_input(ckpt_path);
        const mdn::NetworkParams params = mdn::load_checkpoint(ckpt_path);
        const mdn::MarginStats stats = mdn::margin_stats(params, data);
        const mdn::CushionProfile cushions = mdn::estimate_cushions(params, data, copts);
        const mdn::BoundReport report = mdn::compute_bound_report(params, data, stats, cushions, config);
        if (!report.mdnet_valid) {
            std::cerr << "warning: margin ratio lambda >= 1 (or margin mean <= 0) for "
                      << ckpt_path << "; mdnet terms flagged invalid\n";
        }
        csv += mdn::bound_report_csv_row(ckpt_path, report) + "\n";
        nlohmann::json entry = {{"checkpoint", ckpt_path},
                                {"report", mdn::bound_report_json(report)}};
        reports.push_back(std::move(entry));
        profiles.push_back({{"checkpoint", ckpt_path},
                            {"profile", mdn::cushion_profile_json(cushions)}});
    }

    write_text(out_path(a.tag + "_bounds.csv"), csv);
    write_json(out_path(a.tag + "_bounds.json"), reports);
    write_json(out_path(a.tag + "_cushions.json"), profiles);
    manifest.outputs = {a.tag + "_bounds.csv", a.tag + "_bounds.json", a.tag + "_cushions.json"};
    manifest.save(out_path(a.tag + "_manifest.json"));
    std::cout << "wrote " << out_path(a.tag + "_bounds.csv") << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// small-sample
// ---------------------------------------------------------------------------

struct SmallSampleArgs {
    DataOpts data;
    std::string test_images;
    std::string test_labels;
    std::vector<double> fractions = {0.01, 0.05};
    std::vector<std::string> losses = {"mdnet", "hinge"};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::vector<std::size_t> layers;
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double lr = 0.01;
    double momentum = 0.9;
    double r = 2.0;
    double theta = 0.5;
    double eta = 1.0;
    double hinge_margin = 1.0;
    std::string tag = "small_sample";
};

int run_small_sample(const SmallSampleArgs& a) {
    mdn::RunManifest manifest;
    manifest.command = "small-sample";
    manifest.options = {{"data", data_opts_json(a.data)},
                        {"test_images", a.test_images},
                        {"test_labels", a.test_labels},
                        {"fractions", a.fractions},
                        {"losses", a.losses},
                        {"seeds", a.seeds},
                        {"layers", a.layers},
                        {"epochs", a.epochs},
                        {"batch_size", a.batch_size},
                        {"learning_rate", a.lr},
                        {"momentum", a.momentum},
                        {"r", a.r},
                        {"theta", a.theta},
                        {"eta", a.eta},
                        {"hinge_margin", a.hinge_margin},
                        {"tag", a.tag}};
    manifest.seeds = {{"seeds", a.seeds}};

    const mdn::Dataset full_train = load_data(a.data, &manifest);
    mdn::Dataset test_data;
    if (!a.test_images.empty()) {
        if (a.test_labels.empty()) throw CLI::ValidationError("--test-images needs --test-labels");
        test_data = mdn::load_idx(a.test_images, a.test_labels);
        manifest.add_input(a.test_images);
        manifest.add_input(a.test_labels);
    } else if (a.data.source == "synth") {
        // fresh draw from the same synthetic family
        test_data = mdn::synth_blobs(a.data.synth_k, a.data.synth_dim, a.data.synth_per_class,
                                     a.data.synth_sep, a.data.synth_seed + 1000);
    } else {
        throw CLI::ValidationError("small-sample with --data idx requires --test-images/--test-labels");
    }

    std::string csv = "fraction,loss,seed,train_size,train_accuracy,test_accuracy\n";
    for (double fraction : a.fractions) {
        for (const std::string& loss : a.losses) {
            for (std::uint64_t seed : a.seeds) {
                const mdn::Dataset cell =
                    mdn::subset_fraction(full_train, fraction, seed, true).data;
                mdn::TrainConfig cfg;
                cfg.loss.variant = mdn::loss_variant_from_name(loss);
                cfg.loss.r = a.r;
                cfg.loss.theta = a.theta;
                cfg.loss.eta = a.eta;
                cfg.loss.hinge_margin = a.hinge_margin;
                cfg.layer_dims = a.layers;
                cfg.epochs = a.epochs;
                cfg.batch_size = a.batch_size;
                cfg.learning_rate = a.lr;
                cfg.momentum = a.momentum;
                cfg.seed = seed;
                cfg.telemetry_every = cfg.epochs;  // final record only
                auto [params, history] = mdn::train(cfg, cell, test_data);
                const auto& last = history.records.back();
                csv += fmt17(fraction) + "," + loss + "," + std::to_string(seed) + "," +
                       std::to_string(cell.size()) + "," + fmt17(last.train_accuracy) + "," +
                       fmt17(last.eval_accuracy) + "\n";
            }
        }
    }
    write_text(out_path(a.tag + "_small_sample.csv"), csv);
    manifest.outputs = {a.tag + "_small_sample.csv"};
    manifest.save(out_path(a.tag + "_manifest.json"));
    std::cout << "wrote " << out_path(a.tag + "_small_sample.csv") << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// perturb / extreme
// ---------------------------------------------------------------------------

struct PerturbArgs {
    std::string checkpoint;
    DataOpts data;
    std::size_t trials = 50;
    std::uint64_t seed = 1;
    double sigma = -1.0;  // <0: use the derived sigma
    bool dump_trials = false;
    std::string tag = "perturb";
};

int run_perturb(const PerturbArgs& a) {
    mdn::RunManifest manifest;
    manifest.command = "perturb";
    manifest.options = {{"checkpoint", a.checkpoint}, {"data", data_opts_json(a.data)},
                        {"trials", a.trials},         {"seed", a.seed},
                        {"sigma", a.sigma},           {"dump_trials", a.dump_trials},
                        {"tag", a.tag}};
    manifest.seeds = {{"seed", a.seed}};
    manifest.add_input(a.checkpoint);

    const mdn::NetworkParams params = mdn::load_checkpoint(a.checkpoint);
    const mdn::Dataset data = load_data(a.data, &manifest);
    const mdn::MarginStats stats = mdn::margin_stats(params, data);
    const mdn::CushionProfile cushions = mdn::estimate_cushions(params, data);
    const mdn::PerturbReport report =
        mdn::perturbation_experiment(params, data, stats, cushions, a.trials, a.seed, a.sigma);

    write_json(out_path(a.tag + "_perturb.json"), mdn::perturb_report_json(report));
    manifest.outputs = {a.tag + "_perturb.json"};
    if (a.dump_trials) {
        mdn::write_perturb_trials_csv(report, out_path(a.tag + "_perturb_trials.csv"));
        manifest.outputs.push_back(a.tag + "_perturb_trials.csv");
    }
    manifest.save(out_path(a.tag + "_manifest.json"));
    std::cout << "perturb: sigma " << fmt17(report.sigma) << ", fraction_below_threshold "
              << fmt17(report.fraction_below_threshold) << "\n";
    return kExitOk;
}

struct ExtremeArgs {
    std::size_t m = 9;
    std::size_t trials = 100000;
    std::uint64_t seed = 1;
    std::string tag = "extreme";
};

int run_extreme(const ExtremeArgs& a) {
    mdn::RunManifest manifest;
    manifest.command = "extreme";
    manifest.options = {{"m", a.m}, {"trials", a.trials}, {"seed", a.seed}, {"tag", a.tag}};
    manifest.seeds = {{"seed", a.seed}};

    const double freq = mdn::extreme_value_mc(a.m, a.trials, a.seed);
    nlohmann::json j = {{"m", a.m},
                        {"trials", a.trials},
                        {"seed", a.seed},
                        {"frequency", freq},
                        {"expected", 1.0 / double(a.m + 1)}};
    write_json(out_path(a.tag + "_extreme.json"), j);
    manifest.outputs = {a.tag + "_extreme.json"};
    manifest.save(out_path(a.tag + "_manifest.json"));
    std::cout << "extreme: frequency " << fmt17(freq) << " (expected "
              << fmt17(1.0 / double(a.m + 1)) << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

struct EmbedArgs {
    std::string checkpoint;
    DataOpts data;
    std::string tag = "embed";
};

int run_embed(const EmbedArgs& a) {
    mdn::RunManifest manifest;
    manifest.command = "embed";
    manifest.options = {{"checkpoint", a.checkpoint}, {"data", data_opts_json(a.data)},
                        {"tag", a.tag}};
    manifest.seeds = nlohmann::json::object();
    manifest.add_input(a.checkpoint);

    const mdn::NetworkParams params = mdn::load_checkpoint(a.checkpoint);
    const mdn::Dataset data = load_data(a.data, &manifest);

    // last hidden representation; for a 1-layer net this is the input itself
    std::vector<mdn::DenseVector> embeddings;
    embeddings.reserve(data.size());
    for (std::size_t s = 0; s < data.size(); ++s) {
        const mdn::ForwardTrace trace = mdn::forward(params, data.features[s]);
        embeddings.push_back(params.depth() >= 2 ? trace.postacts.back() : trace.input);
    }

    const std::string csv_path = out_path(a.tag + "_embeddings.csv");
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw std::runtime_error(csv_path + ": cannot open for write");
        out << "sample_id,label";
        for (std::size_t i = 0; i < embeddings.front().dim(); ++i) out << ",e" << i;
        out << '\n';
        for (std::size_t s = 0; s < embeddings.size(); ++s) {
            out << s << ',' << data.labels[s];
            for (std::size_t i = 0; i < embeddings[s].dim(); ++i) {
                out << ',' << fmt17(embeddings[s][i]);
            }
            out << '\n';
        }
    }

    const mdn::ScatterDecomposition dec = mdn::variance_decomposition(embeddings, data.labels);
    const mdn::MarginStats stats = mdn::margin_stats(params, data);
    nlohmann::json j = {{"S_A", dec.within_sa},
                        {"S_E", dec.between_se},
                        {"ratio", dec.infinite_ratio ? nlohmann::json("inf")
                                                     : nlohmann::json(dec.ratio)},
                        {"one_over_lambda",
                         stats.ratio_lambda > 0.0 && std::isfinite(stats.ratio_lambda)
                             ? nlohmann::json(1.0 / stats.ratio_lambda)
                             : nlohmann::json("inf")},
                        {"embedding_dim", embeddings.front().dim()},
                        {"samples", embeddings.size()}};
    write_json(out_path(a.tag + "_embed.json"), j);

    manifest.outputs = {a.tag + "_embeddings.csv", a.tag + "_embed.json"};
    manifest.save(out_path(a.tag + "_manifest.json"));
    std::cout << "embed: S_E/S_A "
              << (dec.infinite_ratio ? std::string("inf") : fmt17(dec.ratio)) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"margin-distribution training, cushion probing, and bound comparison"};
    app.require_subcommand(1);

    if (const char* env = std::getenv("MDN_OUT_DIR")) g_out_dir = env;
    app.add_option("--out-dir", g_out_dir, "Output directory (env MDN_OUT_DIR)")
        ->capture_default_str();
    // key=value config file; subcommand options use dotted keys (train.epochs=5)
    // or a [train] section. Command-line flags take precedence.
    app.set_config("--config");

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a classifier and write telemetry");
    add_train_opts(train_cmd, train_args);

    BoundsArgs bounds_args;
    CLI::App* bounds_cmd =
        app.add_subcommand("bounds", "Cushion profile + bound report for checkpoints");
    bounds_cmd->add_option("--checkpoint", bounds_args.checkpoints, "Checkpoint file(s), ordered")
        ->required();
    add_data_opts(bounds_cmd, bounds_args.data);
    bounds_cmd->add_option("--gamma-policy", bounds_args.gamma_policy, "minimum | percentile")
        ->check(CLI::IsMember({"minimum", "percentile"}))
        ->capture_default_str();
    bounds_cmd->add_option("--gamma-percentile", bounds_args.gamma_percentile)
        ->capture_default_str();
    bounds_cmd->add_option("--delta", bounds_args.delta, "Confidence parameter")
        ->capture_default_str();
    bounds_cmd->add_option("--smoothness-trials", bounds_args.smoothness_trials,
                           "Monte-Carlo trials for interlayer smoothness (0 = skip)")
        ->capture_default_str();
    bounds_cmd->add_option("--smoothness-sigma", bounds_args.smoothness_sigma)
        ->capture_default_str();
    bounds_cmd->add_option("--interlayer-denom", bounds_args.interlayer_denom,
                           "printed | input (interlayer cushion denominator)")
        ->check(CLI::IsMember({"printed", "input"}))
        ->capture_default_str();
    bounds_cmd->add_option("--seed", bounds_args.seed)->capture_default_str();
    bounds_cmd->add_option("--tag", bounds_args.tag)->capture_default_str();

    SmallSampleArgs ss_args;
    CLI::App* ss_cmd = app.add_subcommand("small-sample",
                                          "Accuracy-vs-fraction sweep over losses and seeds");
    add_data_opts(ss_cmd, ss_args.data, /*with_fraction=*/false);
    ss_cmd->add_option("--test-images", ss_args.test_images);
    ss_cmd->add_option("--test-labels", ss_args.test_labels);
    ss_cmd->add_option("--fractions", ss_args.fractions, "Subset fractions")
        ->delimiter(',')
        ->capture_default_str();
    ss_cmd->add_option("--losses", ss_args.losses, "Loss variants")
        ->delimiter(',')
        ->capture_default_str();
    ss_cmd->add_option("--seeds", ss_args.seeds, "Seeds (one run per seed)")
        ->delimiter(',')
        ->capture_default_str();
    ss_cmd->add_option("--layers", ss_args.layers, "Layer dims")->required()->delimiter(',');
    ss_cmd->add_option("--epochs", ss_args.epochs)->capture_default_str();
    ss_cmd->add_option("--batch-size", ss_args.batch_size)->capture_default_str();
    ss_cmd->add_option("--lr", ss_args.lr)->capture_default_str();
    ss_cmd->add_option("--momentum", ss_args.momentum)->capture_default_str();
    ss_cmd->add_option("--r", ss_args.r)->capture_default_str();
    ss_cmd->add_option("--theta", ss_args.theta)->capture_default_str();
    ss_cmd->add_option("--eta", ss_args.eta)->capture_default_str();
    ss_cmd->add_option("--hinge-margin", ss_args.hinge_margin)->capture_default_str();
    ss_cmd->add_option("--tag", ss_args.tag)->capture_default_str();

    PerturbArgs perturb_args;
    CLI::App* perturb_cmd =
        app.add_subcommand("perturb", "Weight-noise perturbation experiment on a checkpoint");
    perturb_cmd->add_option("--checkpoint", perturb_args.checkpoint)->required();
    add_data_opts(perturb_cmd, perturb_args.data);
    perturb_cmd->add_option("--trials", perturb_args.trials)->capture_default_str();
    perturb_cmd->add_option("--seed", perturb_args.seed)->capture_default_str();
    perturb_cmd->add_option("--sigma", perturb_args.sigma,
                            "Noise scale override (default: derived from margins)")
        ->capture_default_str();
    perturb_cmd->add_flag("--dump-trials", perturb_args.dump_trials, "Write per-trial deltas CSV");
    perturb_cmd->add_option("--tag", perturb_args.tag)->capture_default_str();

    ExtremeArgs extreme_args;
    CLI::App* extreme_cmd =
        app.add_subcommand("extreme", "Extreme-value tail frequency Monte Carlo");
    extreme_cmd->add_option("--m", extreme_args.m, "Sample count in the max")->capture_default_str();
    extreme_cmd->add_option("--trials", extreme_args.trials)->capture_default_str();
    extreme_cmd->add_option("--seed", extreme_args.seed)->capture_default_str();
    extreme_cmd->add_option("--tag", extreme_args.tag)->capture_default_str();

    EmbedArgs embed_args;
    CLI::App* embed_cmd =
        app.add_subcommand("embed", "Dump last-hidden-layer embeddings and scatter summary");
    embed_cmd->add_option("--checkpoint", embed_args.checkpoint)->required();
    add_data_opts(embed_cmd, embed_args.data);
    embed_cmd->add_option("--tag", embed_args.tag)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message and usage pointer
        return kExitUsage;
    }

    try {
        if (*train_cmd) return run_train(train_args);
        if (*bounds_cmd) return run_bounds(bounds_args);
        if (*ss_cmd) return run_small_sample(ss_args);
        if (*perturb_cmd) return run_perturb(perturb_args);
        if (*extreme_cmd) return run_extreme(extreme_args);
        if (*embed_cmd) return run_embed(embed_args);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
