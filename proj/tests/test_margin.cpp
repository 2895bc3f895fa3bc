#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mdn/margin.hpp"
#include "mdn/rng.hpp"
#include "oracles.hpp"

using mdn::DenseVector;
using mdn::LossConfig;
using mdn::LossVariant;

namespace {

LossConfig mdnet_cfg(double r = 2.0, double theta = 0.5, double eta = 1.0) {
    LossConfig cfg;
    cfg.variant = LossVariant::mdnet;
    cfg.r = r;
    cfg.theta = theta;
    cfg.eta = eta;
    return cfg;
}

}  // namespace

TEST_CASE("multiclass margin") {
    const DenseVector s({3.0, 1.0, -0.5});
    CHECK(mdn::margin(s, 0) == 2.0);
    CHECK(mdn::margin(s, 2) == -3.5);
    CHECK(mdn::margin(DenseVector({1.0, 1.0}), 0) == 0.0);
    CHECK_THROWS_AS(mdn::margin(s, 3), std::invalid_argument);
    CHECK_THROWS_AS(mdn::margin(s, -1), std::invalid_argument);

    // invariant to adding a constant to all scores
    mdn::Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        DenseVector v(4);
        rng.fill_gaussian(v.data(), 4);
        const int y = int(rng.below(4));
        const double base = mdn::margin(v, y);
        const double shift = 10.0 * rng.uniform() - 5.0;
        DenseVector w(4);
        for (int i = 0; i < 4; ++i) w[i] = v[i] + shift;
        CHECK(std::fabs(mdn::margin(w, y) - base) < 1e-12);
    }
}

TEST_CASE("margin statistics") {
    auto all2 = mdn::margin_stats_from({2, 2, 2, 2});
    CHECK(all2.mean_r == 2.0);
    CHECK(all2.var_theta2 == 0.0);
    CHECK(all2.ratio_lambda == 0.0);
    CHECK(all2.valid);

    auto two = mdn::margin_stats_from({1, 3});
    CHECK(two.mean_r == 2.0);
    CHECK(two.var_theta2 == 1.0);  // population variance
    CHECK(two.ratio_lambda == 0.5);

    auto neg = mdn::margin_stats_from({-1, -2});
    CHECK(!neg.valid);

    CHECK_THROWS_AS(mdn::margin_stats_from({}), std::invalid_argument);

    // lambda is invariant to positive rescaling of all margins
    mdn::Rng rng(17);
    std::vector<double> margins(50);
    for (auto& g : margins) g = rng.uniform() + 0.5;
    const auto base = mdn::margin_stats_from(margins);
    for (double c : {0.1, 3.0, 250.0}) {
        std::vector<double> scaled = margins;
        for (auto& g : scaled) g *= c;
        const auto st = mdn::margin_stats_from(scaled);
        CHECK(oracles::rel_err(st.ratio_lambda, base.ratio_lambda) < 1e-10);
    }
}

TEST_CASE("margin_stats over a dataset matches a one-pass recomputation") {
    const auto params = mdn::init_params({6, 8, 4}, 2);
    const mdn::Dataset data = mdn::synth_blobs(4, 6, 25, 3.0, 9);
    const auto stats = mdn::margin_stats(params, data);
    REQUIRE(stats.margins.size() == data.size());

    double mean = 0.0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const double g =
            mdn::margin(mdn::forward(params, data.features[s]).scores(), data.labels[s]);
        CHECK(g == stats.margins[s]);
        mean += g;
    }
    mean /= double(data.size());
    double var = 0.0;
    for (double g : stats.margins) var += (g - mean) * (g - mean);
    var /= double(data.size());
    CHECK(oracles::rel_err(stats.mean_r, mean) < 1e-12);
    CHECK(oracles::rel_err(stats.var_theta2, var) < 1e-12);
}

TEST_CASE("mdnet loss values") {
    const LossConfig cfg = mdnet_cfg();
    CHECK(mdn::mdnet_loss(2.0, cfg) == 0.0);
    CHECK(mdn::mdnet_loss(1.0, cfg) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(mdn::mdnet_loss(3.0, cfg) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(mdn::mdnet_loss(0.0, cfg) == 1.0);  // exact

    LossConfig bad = mdnet_cfg(1.0, 1.5);
    CHECK_THROWS_AS(mdn::mdnet_loss(0.0, bad), std::invalid_argument);
}

TEST_CASE("mdnet loss is continuous at the knots") {
    const LossConfig cfg = mdnet_cfg(2.0, 0.5, 3.0);
    for (double knot : {cfg.r - cfg.theta, cfg.r + cfg.theta}) {
        const double eps = 1e-9;
        CHECK(std::fabs(mdn::mdnet_loss(knot - eps, cfg) - mdn::mdnet_loss(knot + eps, cfg)) <
              1e-12);
        CHECK(mdn::mdnet_loss(knot, cfg) <= 1e-15);
    }
}

TEST_CASE("mdnet loss is convex") {
    const LossConfig cfg = mdnet_cfg(2.0, 0.5, 0.7);
    mdn::Rng rng(23);
    for (int i = 0; i < 1000; ++i) {
        const double g1 = 12.0 * rng.uniform() - 4.0;
        const double g2 = 12.0 * rng.uniform() - 4.0;
        const double t = rng.uniform();
        const double lhs = mdn::mdnet_loss(t * g1 + (1 - t) * g2, cfg);
        const double rhs = t * mdn::mdnet_loss(g1, cfg) + (1 - t) * mdn::mdnet_loss(g2, cfg);
        CHECK(lhs <= rhs + 1e-12);
    }
}

TEST_CASE("loss_and_score_grad hand cases") {
    // in-band margin: zero loss, zero gradient
    const auto lg = mdn::loss_and_score_grad(DenseVector({3.0, 1.0, 0.0}), 0, mdnet_cfg());
    CHECK(lg.loss == 0.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(lg.dscores[i] == 0.0);

    // symmetric two-class cross entropy
    LossConfig ce;
    ce.variant = LossVariant::cross_entropy;
    const auto lg2 = mdn::loss_and_score_grad(DenseVector({0.0, 0.0}), 0, ce);
    CHECK(lg2.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(lg2.dscores[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(lg2.dscores[1] == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(mdn::loss_and_score_grad(DenseVector({1.0, 2.0}), 2, ce),
                    std::invalid_argument);
}

TEST_CASE("score gradients match central finite differences for every variant") {
    std::vector<LossConfig> configs(4);
    configs[0] = mdnet_cfg(1.5, 0.4, 0.8);
    configs[1].variant = LossVariant::cross_entropy;
    configs[2].variant = LossVariant::hinge;
    configs[3].variant = LossVariant::soft_hinge;

    const double h = 1e-6;
    mdn::Rng rng(31);
    for (int t = 0; t < 40; ++t) {
        DenseVector s(5);
        rng.fill_gaussian(s.data(), 5);
        const int y = int(rng.below(5));

        // skip near-ties between the top competitors (argmax kink)
        double best = -1e300, second = -1e300;
        for (std::size_t j = 0; j < 5; ++j) {
            if (j == std::size_t(y)) continue;
            if (s[j] > best) {
                second = best;
                best = s[j];
            } else if (s[j] > second) {
                second = s[j];
            }
        }
        if (best - second < 1e-3) continue;

        for (const auto& cfg : configs) {
            const double gamma = mdn::margin(s, y);
            if (cfg.variant == LossVariant::hinge &&
                std::fabs(cfg.hinge_margin - gamma) < 1e-3) continue;
            if (cfg.variant == LossVariant::mdnet &&
                (std::fabs(gamma - (cfg.r - cfg.theta)) < 1e-3 ||
                 std::fabs(gamma - (cfg.r + cfg.theta)) < 1e-3)) continue;

            const auto lg = mdn::loss_and_score_grad(s, y, cfg);
            for (std::size_t j = 0; j < 5; ++j) {
                DenseVector sp = s, sm = s;
                sp[j] += h;
                sm[j] -= h;
                const double fd = (mdn::loss_and_score_grad(sp, y, cfg).loss -
                                   mdn::loss_and_score_grad(sm, y, cfg).loss) /
                                  (2.0 * h);
                if (std::fabs(fd - lg.dscores[j]) >= 1e-9) {
                    CHECK(oracles::rel_err(fd, lg.dscores[j]) < 1e-5);
                }
            }
        }
    }
}

TEST_CASE("empirical band loss") {
    CHECK(mdn::band_loss_empirical({2, 2, 2}, 2, 1) == 0.0);
    CHECK(mdn::band_loss_empirical({0, 2, 10}, 2, 1) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(mdn::band_loss_empirical({}, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(mdn::band_loss_empirical({1.0}, 1, 2), std::invalid_argument);

    // counting oracle + range + zero-iff-in-band
    mdn::Rng rng(41);
    for (int t = 0; t < 25; ++t) {
        std::vector<double> margins(40);
        for (auto& g : margins) g = 8.0 * rng.uniform() - 2.0;
        const double r = 2.0, theta = 1.0;
        const double got = mdn::band_loss_empirical(margins, r, theta);
        std::size_t outside = 0;
        bool all_in_band = true;
        for (double g : margins) {
            const bool in_band = g > r - theta && g <= r + theta;
            if (!in_band) ++outside;
            all_in_band = all_in_band && in_band;
        }
        CHECK(got == double(outside) / double(margins.size()));
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
        CHECK((got == 0.0) == all_in_band);
    }
}

TEST_CASE("variance decomposition") {
    using mdn::DenseVector;
    std::vector<DenseVector> emb = {DenseVector({0.0, 0.0}), DenseVector({0.0, 2.0}),
                                    DenseVector({10.0, 0.0}), DenseVector({10.0, 2.0})};
    std::vector<int> labels = {0, 0, 1, 1};
    const auto dec = mdn::variance_decomposition(emb, labels);
    CHECK(dec.within_sa == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(dec.between_se == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(dec.ratio == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(!dec.infinite_ratio);

    // published arithmetic through the same ratio path
    const auto pub = mdn::scatter_ratio(15692.0, 804.0);
    CHECK(std::round(pub.ratio * 100.0) / 100.0 == doctest::Approx(19.52));

    // degenerate: identical points per class
    std::vector<DenseVector> tight = {DenseVector({1.0, 1.0}), DenseVector({1.0, 1.0}),
                                      DenseVector({5.0, 5.0})};
    const auto inf = mdn::variance_decomposition(tight, {0, 0, 1});
    CHECK(inf.infinite_ratio);
    CHECK(inf.within_sa == 0.0);

    CHECK_THROWS_AS(mdn::variance_decomposition(emb, {0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("total scatter identity") {
    mdn::Rng rng(53);
    std::vector<mdn::DenseVector> emb;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
        mdn::DenseVector v(3);
        rng.fill_gaussian(v.data(), 3);
        const int c = int(rng.below(4));
        v[0] += 2.0 * c;
        emb.push_back(v);
        labels.push_back(c);
    }
    const auto dec = mdn::variance_decomposition(emb, labels);

    std::vector<double> mean(3, 0.0);
    for (const auto& v : emb) {
        for (int i = 0; i < 3; ++i) mean[i] += v[i];
    }
    for (auto& m : mean) m /= double(emb.size());
    double total = 0.0;
    for (const auto& v : emb) {
        for (int i = 0; i < 3; ++i) total += (v[i] - mean[i]) * (v[i] - mean[i]);
    }
    CHECK(oracles::rel_err(dec.within_sa + dec.between_se, total) < 1e-9);
}
