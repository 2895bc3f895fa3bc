// Integration tests that drive the installed CLI binary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdn/dataset.hpp"
#include "mdn/margin.hpp"
#include "mdn/network.hpp"
#include "mdn/rng.hpp"

namespace {

const std::string kCli = MDN_CLI_PATH;
const std::string kDir = "cli_scratch";

int run(const std::string& args) {
    const std::string cmd = kCli + " --out-dir " + kDir + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(kDir + "/" + path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool exists(const std::string& path) {
    std::ifstream in(kDir + "/" + path);
    return in.good();
}

nlohmann::json slurp_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, sep)) out.push_back(field);
    return out;
}

// 3-class, 16-dim uint8 pattern fixture written as IDX files.
void make_fixture(const std::string& img_path, const std::string& lab_path,
                  std::size_t per_class, std::uint64_t seed) {
    mdn::IdxImages img;
    img.count = std::uint32_t(3 * per_class);
    img.rows = 4;
    img.cols = 4;
    std::vector<std::uint8_t> labels;
    mdn::Rng rng(seed);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t s = 0; s < per_class; ++s) {
            for (int p = 0; p < 16; ++p) {
                const bool on = (p % 3) == c || (p / 4) == c;
                const double noise = 40.0 * rng.gaussian();
                double v = (on ? 200.0 : 30.0) + noise;
                if (v < 0) v = 0;
                if (v > 255) v = 255;
                img.pixels.push_back(std::uint8_t(v));
            }
            labels.push_back(std::uint8_t(c));
        }
    }
    mdn::write_idx_images(kDir + "/" + img_path, img);
    mdn::write_idx_labels(kDir + "/" + lab_path, labels);
}

struct Setup {
    Setup() {
        std::system(("mkdir -p " + kDir).c_str());
        make_fixture("fx_train_img.idx", "fx_train_lab.idx", 40, 101);
        make_fixture("fx_test_img.idx", "fx_test_lab.idx", 15, 202);
    }
};
const Setup setup_once;

}  // namespace

TEST_CASE("train smoke: exit 0 and expected files") {
    const int rc = run(
        "train --data synth --loss mdnet --r 2 --theta 0.5 --eta 1 --seed 7 "
        "--layers 16,10,4 --epochs 5 --synth-k 4 --synth-dim 16 --synth-per-class 20 --tag smoke");
    CHECK(rc == 0);
    CHECK(exists("smoke_checkpoint.json"));
    CHECK(exists("smoke_history.csv"));
    CHECK(exists("smoke_history.json"));
    CHECK(exists("smoke_margins.csv"));
    CHECK(exists("smoke_manifest.json"));
}

TEST_CASE("missing required flag exits 2") {
    CHECK(run("train --data synth") == 2);
    CHECK(run("bounds") == 2);
    CHECK(run("definitely-not-a-command") == 2);
}

TEST_CASE("rerun with an equal manifest is byte-identical") {
    const std::string args =
        "train --data synth --loss hinge --seed 11 --layers 16,8,4 --epochs 6 "
        "--synth-k 4 --synth-dim 16 --synth-per-class 15 --tag rr";
    REQUIRE(run(args) == 0);
    const std::string hist1 = slurp("rr_history.csv");
    const std::string man1 = slurp("rr_manifest.json");
    const std::string ckpt1 = slurp("rr_checkpoint.json");
    REQUIRE(run(args) == 0);
    CHECK(slurp("rr_history.csv") == hist1);
    CHECK(slurp("rr_manifest.json") == man1);
    CHECK(slurp("rr_checkpoint.json") == ckpt1);
}

TEST_CASE("bounds on the identity-net fixture") {
    // identity checkpoint + one-hot IDX pair: minimum margin is exactly 1
    mdn::save_checkpoint(mdn::NetworkParams({mdn::DenseMatrix::identity(2)}),
                         kDir + "/id_ckpt.json");
    mdn::IdxImages img;
    img.count = 2;
    img.rows = 1;
    img.cols = 2;
    img.pixels = {255, 0, 0, 255};
    mdn::write_idx_images(kDir + "/id_img.idx", img);
    mdn::write_idx_labels(kDir + "/id_lab.idx", {0, 1});

    const int rc = run(
        "bounds --checkpoint " + kDir + "/id_ckpt.json --data idx --images " + kDir + "/id_img.idx --labels " +
        kDir + "/id_lab.idx --gamma-policy minimum --tag idb");
    REQUIRE(rc == 0);
    const auto reports = slurp_json("idb_bounds.json");
    REQUIRE(reports.size() == 1);
    const auto& terms = reports[0]["report"]["terms"];
    CHECK(double(terms["frobenius"]) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(double(terms["l1_inf"]) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(double(terms["spec_l12"]) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(double(reports[0]["report"]["gamma_ref"]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bounds: multiple checkpoints produce ordered rows matching json") {
    REQUIRE(run("train --data synth --loss mdnet --r 1 --theta 0.25 --seed 5 --layers 16,8,4 "
                "--epochs 3 --synth-k 4 --synth-dim 16 --synth-per-class 15 --tag ck1") == 0);
    REQUIRE(run("train --data synth --loss mdnet --r 1 --theta 0.25 --seed 5 --layers 16,8,4 "
                "--epochs 30 --synth-k 4 --synth-dim 16 --synth-per-class 15 --tag ck2") == 0);

    const int rc = run(
        "bounds --checkpoint " + kDir + "/ck1_checkpoint.json --checkpoint " + kDir +
        "/ck2_checkpoint.json --data synth --synth-k 4 --synth-dim 16 --synth-per-class 15 --tag two");
    REQUIRE(rc == 0);

    const auto lines = csv_lines(slurp("two_bounds.csv"));
    REQUIRE(lines.size() == 3);  // header + 2 rows
    CHECK(split(lines[1])[0] == kDir + "/ck1_checkpoint.json");
    CHECK(split(lines[2])[0] == kDir + "/ck2_checkpoint.json");

    // CSV values equal the JSON values
    const auto reports = slurp_json("two_bounds.json");
    const auto header = split(lines[0]);
    for (std::size_t row = 0; row < 2; ++row) {
        const auto fields = split(lines[row + 1]);
        const auto& rep = reports[row]["report"];
        auto field_of = [&](const std::string& name) {
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (header[i] == name) return fields[i];
            }
            REQUIRE(false);
            return std::string();
        };
        CHECK(std::stod(field_of("gamma_ref")) == double(rep["gamma_ref"]));
        CHECK(std::stod(field_of("frobenius")) == double(rep["terms"]["frobenius"]));
        CHECK(std::stod(field_of("spec_fro")) == double(rep["terms"]["spec_fro"]));
    }
}

TEST_CASE("extreme command frequency") {
    REQUIRE(run("extreme --m 9 --trials 100000 --seed 1 --tag ex9") == 0);
    const auto j = slurp_json("ex9_extreme.json");
    CHECK(double(j["expected"]) == doctest::Approx(0.1));
    CHECK(double(j["frequency"]) == doctest::Approx(0.1).epsilon(0.03));

    // rerun determinism
    const std::string first = slurp("ex9_extreme.json");
    REQUIRE(run("extreme --m 9 --trials 100000 --seed 1 --tag ex9") == 0);
    CHECK(slurp("ex9_extreme.json") == first);
}

TEST_CASE("perturb with sigma 0") {
    REQUIRE(run("train --data synth --loss mdnet --r 1 --theta 0.25 --seed 13 --layers 16,8,4 "
                "--epochs 40 --synth-k 4 --synth-dim 16 --synth-per-class 20 --synth-sep 6 "
                "--tag pt") == 0);
    REQUIRE(run("perturb --checkpoint " + kDir + "/pt_checkpoint.json --data synth --synth-k 4 "
                "--synth-dim 16 --synth-per-class 20 --synth-sep 6 --sigma 0 --trials 5 "
                "--tag pz") == 0);
    const auto j = slurp_json("pz_perturb.json");
    CHECK(double(j["fraction_below_threshold"]) == 1.0);
    CHECK(double(j["sigma"]) == 0.0);
    CHECK(double(j["delta_stats"]["max"]) == 0.0);
}

TEST_CASE("embed dumps the last hidden layer and a consistent summary") {
    REQUIRE(run("train --data synth --loss mdnet --r 1 --theta 0.25 --seed 17 --layers 16,12,4 "
                "--epochs 60 --synth-k 4 --synth-dim 16 --synth-per-class 20 --synth-sep 8 "
                "--tag em") == 0);
    REQUIRE(run("embed --checkpoint " + kDir + "/em_checkpoint.json --data synth --synth-k 4 --synth-dim 16 "
                "--synth-per-class 20 --synth-sep 8 --tag em") == 0);

    const auto lines = csv_lines(slurp("em_embeddings.csv"));
    REQUIRE(lines.size() == 81);                 // header + 80 samples
    CHECK(split(lines[0]).size() == 2 + 12);     // sample_id,label,e0..e11

    // summary ratio matches variance_decomposition on the dumped CSV
    std::vector<mdn::DenseVector> embeddings;
    std::vector<int> labels;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i]);
        labels.push_back(std::stoi(f[1]));
        std::vector<double> v;
        for (std::size_t k = 2; k < f.size(); ++k) v.push_back(std::stod(f[k]));
        embeddings.emplace_back(std::move(v));
    }
    const auto dec = mdn::variance_decomposition(embeddings, labels);
    const auto j = slurp_json("em_embed.json");
    CHECK(double(j["S_A"]) == doctest::Approx(dec.within_sa).epsilon(1e-12));
    CHECK(double(j["S_E"]) == doctest::Approx(dec.between_se).epsilon(1e-12));
    CHECK(double(j["ratio"]) == doctest::Approx(dec.ratio).epsilon(1e-12));

    // clustered, trained fixture separates classes
    CHECK(double(j["ratio"]) > 1.0);
}

TEST_CASE("small-sample sweep: row count and replay oracle") {
    const std::string data_flags =
        "--data idx --images " + kDir + "/fx_train_img.idx --labels " + kDir +
        "/fx_train_lab.idx";
    REQUIRE(run("small-sample " + data_flags + " --test-images " + kDir +
                "/fx_test_img.idx --test-labels " + kDir +
                "/fx_test_lab.idx --fractions 0.5,0.25 --losses hinge,mdnet --seeds 3,4 "
                "--layers 16,10,3 --epochs 15 --r 1 --theta 0.25 --tag sw") == 0);
    const auto lines = csv_lines(slurp("sw_small_sample.csv"));
    REQUIRE(lines.size() == 1 + 2 * 2 * 2);  // header + fractions x losses x seeds
    CHECK(lines[0] == "fraction,loss,seed,train_size,train_accuracy,test_accuracy");

    // replay one cell through cmd_train with the same seeds
    std::string cell;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i]);
        if (f[0] == "0.5" && f[1] == "hinge" && f[2] == "3") cell = lines[i];
    }
    REQUIRE(!cell.empty());
    REQUIRE(run("train " + data_flags +
                " --fraction 0.5 --subset-seed 3 --seed 3 --loss hinge --layers 16,10,3 "
                "--epochs 15 --eval-images " + kDir + "/fx_test_img.idx --eval-labels " + kDir +
                "/fx_test_lab.idx --tag replay") == 0);
    const auto hist = csv_lines(slurp("replay_history.csv"));
    const auto last = split(hist.back());
    const auto cell_fields = split(cell);
    CHECK(cell_fields[4] == last[2]);  // train accuracy
    CHECK(cell_fields[5] == last[3]);  // test accuracy
}

TEST_CASE("config file with flag override precedence") {
    {
        std::ofstream cfg(kDir + "/train.cfg");
        cfg << "train.data=synth\n"
               "train.loss=cross_entropy\n"
               "train.layers=16,8,4\n"
               "train.epochs=5\n"
               "train.synth-k=4\n"
               "train.synth-dim=16\n"
               "train.synth-per-class=10\n"
               "train.tag=cfgd\n";
    }
    REQUIRE(run("--config " + kDir + "/train.cfg train") == 0);
    CHECK(csv_lines(slurp("cfgd_history.csv")).size() == 1 + 5);

    // command line overrides the config value
    REQUIRE(run("--config " + kDir + "/train.cfg train --epochs 3 --tag cfgd2") == 0);
    CHECK(csv_lines(slurp("cfgd2_history.csv")).size() == 1 + 3);
}
