#include "mdn/norms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mdn/kernels.hpp"
#include "mdn/rng.hpp"

namespace mdn {

namespace {

constexpr double kPowerTol = 1e-12;
constexpr int kPowerMaxIters = 500;
constexpr int kPowerRestarts = 2;
constexpr std::uint64_t kPowerSeed = 0x5bd1e995u;

// Power iteration on B = M^T M with a Rayleigh-quotient estimate. The init
// vector is seeded per restart, so results are bit-reproducible.
double spectral_power(const DenseMatrix& m) {
    const std::size_t n = m.cols();
    const DenseMatrix b = matmul(transpose(m), m);

    double best = 0.0;
    for (int restart = 0; restart < kPowerRestarts; ++restart) {
        Rng rng(derive_seed(kPowerSeed, static_cast<std::uint64_t>(restart)));
        DenseVector v(n);
        rng.fill_gaussian(v.data(), n);
        double nv = norm2(v);
        if (nv == 0.0) {
            v[0] = 1.0;
            nv = 1.0;
        }
        kernels::active().scale(v.data(), 1.0 / nv, n);

        double lambda = 0.0;
        double prev = 0.0;
        for (int iter = 0; iter < kPowerMaxIters; ++iter) {
            DenseVector bv = matvec(b, v);
            lambda = dot(v, bv);
            const double nb = norm2(bv);
            if (nb == 0.0) {  // v in the null space; for the zero matrix this is exact
                lambda = 0.0;
                break;
            }
            kernels::active().scale(bv.data(), 1.0 / nb, n);
            v = bv;
            if (iter > 0 && std::fabs(lambda - prev) <= kPowerTol * std::fabs(lambda)) break;
            prev = lambda;
        }
        best = std::max(best, lambda);
    }
    return std::sqrt(std::max(0.0, best));
}

double frobenius(const DenseMatrix& m) {
    return std::sqrt(kernels::active().sum_sq(m.data(), m.size()));
}

double two_one(const DenseMatrix& m) {
    const auto& k = kernels::active();
    std::vector<double> col_sq(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        k.sq_acc(col_sq.data(), m.row_ptr(i), m.cols());
    }
    double s = 0.0;
    for (double c : col_sq) s += std::sqrt(c);
    return s;
}

double one_two(const DenseMatrix& m) {
    const auto& k = kernels::active();
    std::vector<double> col_abs(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        k.abs_acc(col_abs.data(), m.row_ptr(i), m.cols());
    }
    return std::sqrt(k.sum_sq(col_abs.data(), col_abs.size()));
}

double one_inf(const DenseMatrix& m) {
    const auto& k = kernels::active();
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        best = std::max(best, k.abs_sum(m.row_ptr(i), m.cols()));
    }
    return best;
}

}  // namespace

double matrix_norm(const DenseMatrix& m, MatrixNorm kind, bool transpose_first) {
    if (transpose_first) return matrix_norm(transpose(m), kind, false);
    switch (kind) {
        case MatrixNorm::spectral:
            return spectral_power(m);
        case MatrixNorm::frobenius:
            return frobenius(m);
        case MatrixNorm::two_one:
            return two_one(m);
        case MatrixNorm::one_two:
            return one_two(m);
        case MatrixNorm::one_inf:
            return one_inf(m);
    }
    throw std::invalid_argument("matrix_norm: unknown norm kind");
}

}  // namespace mdn
