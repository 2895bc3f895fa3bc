#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mdn/margin.hpp"
#include "mdn/network.hpp"
#include "mdn/rng.hpp"
#include "oracles.hpp"

using mdn::DenseMatrix;
using mdn::DenseVector;
using mdn::ForwardTrace;
using mdn::NetworkParams;

namespace {

NetworkParams random_net(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    return mdn::init_params(dims, seed);
}

// Plain recursive re-evaluation, independent of ForwardTrace bookkeeping.
std::vector<double> reference_forward(const NetworkParams& params, const DenseVector& x) {
    std::vector<double> cur(x.values());
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const DenseMatrix& w = params.weights[l];
        std::vector<double> next(w.rows(), 0.0);
        for (std::size_t i = 0; i < w.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * cur[j];
            next[i] = s;
        }
        if (l + 1 < params.weights.size()) {
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace

TEST_CASE("identity net forward") {
    NetworkParams params({DenseMatrix::identity(3)});
    const ForwardTrace trace = mdn::forward(params, DenseVector({1, -2, 3}));
    CHECK(trace.scores().values() == std::vector<double>{1, -2, 3});
}

TEST_CASE("relu gating in a 2-layer identity net") {
    NetworkParams params({DenseMatrix::identity(2), DenseMatrix::identity(2)});
    const ForwardTrace trace = mdn::forward(params, DenseVector({1, -1}));
    CHECK(trace.preacts[0].values() == std::vector<double>{1, -1});
    CHECK(trace.postacts[0].values() == std::vector<double>{1, 0});
    CHECK(trace.scores().values() == std::vector<double>{1, 0});
    CHECK(trace.masks[0] == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("forward matches independent recomputation") {
    const NetworkParams params = random_net({5, 8, 6, 4}, 42);
    for (int t = 0; t < 5; ++t) {
        const DenseVector x = oracles::random_vector(5, 100 + t);
        const ForwardTrace trace = mdn::forward(params, x);
        const auto want = reference_forward(params, x);
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(oracles::rel_err(trace.scores()[i], want[i]) < 1e-12);
        }
    }
    CHECK_THROWS_AS(mdn::forward(params, DenseVector(4)), std::invalid_argument);
}

TEST_CASE("positive homogeneity of bias-free relu nets") {
    const NetworkParams params = random_net({6, 9, 3}, 7);
    const DenseVector x = oracles::random_vector(6, 8);
    for (double c : {0.5, 2.0, 7.25}) {
        DenseVector cx(x.dim());
        for (std::size_t i = 0; i < x.dim(); ++i) cx[i] = c * x[i];
        const auto a = mdn::forward(params, cx).scores();
        const auto b = mdn::forward(params, x).scores();
        for (std::size_t i = 0; i < a.dim(); ++i) {
            CHECK(oracles::rel_err(a[i], c * b[i]) < 1e-12);
        }
    }
}

TEST_CASE("jacobian identity cases") {
    const NetworkParams params = random_net({4, 6, 5, 3}, 11);
    const DenseVector x = oracles::random_vector(4, 12);
    const ForwardTrace trace = mdn::forward(params, x);

    const DenseMatrix j11 = mdn::jacobian_between(params, trace, 1, 1);
    CHECK(j11.values() == DenseMatrix::identity(6).values());

    CHECK_THROWS_AS(mdn::jacobian_between(params, trace, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(mdn::jacobian_between(params, trace, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(mdn::jacobian_between(params, trace, 1, 4), std::invalid_argument);
}

TEST_CASE("all-positive preacts make J^{1,2} = W2") {
    // Positive weights and positive input keep every unit active.
    DenseMatrix w1(3, 2, {0.5, 0.25, 0.75, 0.5, 0.25, 1.0});
    DenseMatrix w2(2, 3, {1.0, -1.0, 2.0, 0.5, 0.25, -0.75});
    NetworkParams params({w1, w2});
    const ForwardTrace trace = mdn::forward(params, DenseVector({1.0, 2.0}));
    const DenseMatrix j = mdn::jacobian_between(params, trace, 1, 2);
    CHECK(j.values() == w2.values());
}

TEST_CASE("jacobian reproduces the forward map exactly") {
    const NetworkParams params = random_net({7, 10, 8, 6, 4}, 21);
    for (int t = 0; t < 4; ++t) {
        const DenseVector x = oracles::random_vector(7, 300 + t);
        const ForwardTrace trace = mdn::forward(params, x);
        const int d = params.depth();
        for (int i = 1; i <= d; ++i) {
            for (int j = i; j <= d; ++j) {
                const DenseMatrix jac = mdn::jacobian_between(params, trace, i, j);
                const DenseVector got = matvec(jac, trace.preacts[i - 1]);
                const DenseVector& want = trace.preacts[j - 1];
                double num = 0.0;
                for (std::size_t u = 0; u < got.dim(); ++u) {
                    num += (got[u] - want[u]) * (got[u] - want[u]);
                }
                const double denom = mdn::norm2(want);
                REQUIRE(denom > 0.0);
                CHECK(std::sqrt(num) / denom < 1e-10);
            }
        }
    }
}

TEST_CASE("backward trivial cases") {
    const NetworkParams params = random_net({4, 5, 3}, 31);
    const DenseVector x = oracles::random_vector(4, 32);
    const ForwardTrace trace = mdn::forward(params, x);

    const mdn::GradientSet zero = mdn::backward(params, trace, DenseVector(3));
    for (const auto& g : zero.layers) {
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.data()[i] == 0.0);
    }

    NetworkParams lin({DenseMatrix::identity(2)});
    const DenseVector xy({3.0, -4.0});
    const ForwardTrace lt = mdn::forward(lin, xy);
    DenseVector e0(2);
    e0[0] = 1.0;
    const mdn::GradientSet g = mdn::backward(lin, lt, e0);
    CHECK(g.layers[0](0, 0) == 3.0);
    CHECK(g.layers[0](0, 1) == -4.0);
    CHECK(g.layers[0](1, 0) == 0.0);
    CHECK(g.layers[0](1, 1) == 0.0);

    CHECK_THROWS_AS(mdn::backward(params, trace, DenseVector(5)), std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences") {
    // Weight-space gradcheck for every loss variant. Points too close to a
    // relu flip or a competitor argmax flip are not differentiable; resample
    // those. Entries below the finite-difference resolution get an absolute
    // floor instead of a relative comparison.
    const double h = 1e-5;
    std::vector<mdn::LossConfig> configs(4);
    configs[0].variant = mdn::LossVariant::mdnet;
    configs[1].variant = mdn::LossVariant::cross_entropy;
    configs[2].variant = mdn::LossVariant::hinge;
    configs[3].variant = mdn::LossVariant::soft_hinge;

    int checked_pairs = 0;
    for (int t = 0; t < 16 && checked_pairs < 10; ++t) {
        NetworkParams params = random_net({5, 7, 6, 4}, 4000 + t);
        const DenseVector x = oracles::random_vector(5, 4100 + t);
        const int label = t % 4;

        const ForwardTrace probe = mdn::forward(params, x);
        bool degenerate = false;
        for (const auto& pre : probe.preacts) {
            for (std::size_t i = 0; i < pre.dim(); ++i) {
                if (std::fabs(pre[i]) < 1e-3) degenerate = true;
            }
        }
        // competitor gap (difference between the two best non-label scores)
        {
            const auto& s = probe.scores();
            double best = -1e300, second = -1e300;
            for (std::size_t j = 0; j < s.dim(); ++j) {
                if (j == std::size_t(label)) continue;
                if (s[j] > best) {
                    second = best;
                    best = s[j];
                } else if (s[j] > second) {
                    second = s[j];
                }
            }
            if (best - second < 1e-3) degenerate = true;
        }
        if (degenerate) continue;
        ++checked_pairs;

        for (const auto& cfg : configs) {
            if (cfg.variant == mdn::LossVariant::hinge ||
                cfg.variant == mdn::LossVariant::mdnet) {
                // keep the margin away from the loss kinks/knots
                const double gamma = mdn::margin(probe.scores(), label);
                const double kink_dist =
                    cfg.variant == mdn::LossVariant::hinge
                        ? std::fabs(cfg.hinge_margin - gamma)
                        : std::min(std::fabs(gamma - (cfg.r - cfg.theta)),
                                   std::fabs(gamma - (cfg.r + cfg.theta)));
                if (kink_dist < 1e-3) continue;
            }
            const ForwardTrace trace = mdn::forward(params, x);
            const mdn::LossGrad lg = mdn::loss_and_score_grad(trace.scores(), label, cfg);
            const mdn::GradientSet grads = mdn::backward(params, trace, lg.dscores);

            for (std::size_t l = 0; l < params.weights.size(); ++l) {
                DenseMatrix& w = params.weights[l];
                for (std::size_t idx = 0; idx < w.size(); idx += 7) {  // sampled entries
                    const double saved = w.data()[idx];
                    w.data()[idx] = saved + h;
                    const double lp = mdn::loss_and_score_grad(mdn::forward(params, x).scores(),
                                                               label, cfg)
                                          .loss;
                    w.data()[idx] = saved - h;
                    const double lm = mdn::loss_and_score_grad(mdn::forward(params, x).scores(),
                                                               label, cfg)
                                          .loss;
                    w.data()[idx] = saved;
                    const double fd = (lp - lm) / (2.0 * h);
                    const double an = grads.layers[l].data()[idx];
                    if (std::fabs(fd - an) >= 1e-9) {
                        CHECK(oracles::rel_err(fd, an) < 1e-5);
                    }
                }
            }
        }
    }
    CHECK(checked_pairs >= 10);
}

TEST_CASE("init_params determinism, shapes, and stddev") {
    const NetworkParams a = mdn::init_params({4, 8, 3}, 99);
    const NetworkParams b = mdn::init_params({4, 8, 3}, 99);
    REQUIRE(a.weights.size() == 2);
    CHECK(a.weights[0].rows() == 8);
    CHECK(a.weights[0].cols() == 4);
    CHECK(a.weights[1].rows() == 3);
    CHECK(a.weights[1].cols() == 8);
    for (std::size_t l = 0; l < 2; ++l) {
        CHECK(a.weights[l].values() == b.weights[l].values());
    }
    const NetworkParams c = mdn::init_params({4, 8, 3}, 100);
    CHECK(a.weights[0].values() != c.weights[0].values());

    const NetworkParams big = mdn::init_params({512, 512}, 1);
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < big.weights[0].size(); ++i) {
        sum_sq += big.weights[0].data()[i] * big.weights[0].data()[i];
    }
    const double got_std = std::sqrt(sum_sq / double(big.weights[0].size()));
    const double want_std = std::sqrt(2.0 / 512.0);
    CHECK(std::fabs(got_std - want_std) / want_std < 0.05);

    CHECK_THROWS_AS(mdn::init_params({}, 1), std::invalid_argument);
    CHECK_THROWS_AS(mdn::init_params({4}, 1), std::invalid_argument);
    CHECK_THROWS_AS(mdn::init_params({4, 0, 3}, 1), std::invalid_argument);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    const NetworkParams params = random_net({6, 5, 4}, 777);
    const std::string path = "test_checkpoint_roundtrip.json";
    mdn::save_checkpoint(params, path);
    const NetworkParams loaded = mdn::load_checkpoint(path);
    REQUIRE(loaded.weights.size() == params.weights.size());
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        CHECK(loaded.weights[l].values() == params.weights[l].values());
    }
    std::remove(path.c_str());
    CHECK_THROWS(mdn::load_checkpoint("does_not_exist.json"));
}
