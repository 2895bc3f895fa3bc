#include "mdn/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mdn/kernels.hpp"

namespace mdn {

namespace {

void check_finite(const std::vector<double>& data, const char* what) {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(what) + ": non-finite entry rejected");
        }
    }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("DenseMatrix: zero dimension");
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("DenseMatrix: zero dimension");
    if (data_.size() != rows * cols) {
        throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data_.size()) +
                                    " != rows*cols " + std::to_string(rows * cols));
    }
    check_finite(data_, "DenseMatrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseVector::DenseVector(std::size_t dim) : data_(dim, 0.0) {
    if (dim == 0) throw std::invalid_argument("DenseVector: zero dimension");
}

DenseVector::DenseVector(std::vector<double> data) : data_(std::move(data)) {
    if (data_.empty()) throw std::invalid_argument("DenseVector: zero dimension");
    check_finite(data_, "DenseVector");
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: dimension mismatch " + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()));
    }
    const auto& k = kernels::active();
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* crow = c.row_ptr(i);
        for (std::size_t p = 0; p < a.cols(); ++p) {
            k.axpy(crow, a(i, p), b.row_ptr(p), b.cols());
        }
    }
    return c;
}

DenseVector matvec(const DenseMatrix& a, const DenseVector& x) {
    if (a.cols() != x.dim()) {
        throw std::invalid_argument("matvec: dimension mismatch");
    }
    const auto& k = kernels::active();
    DenseVector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        y[i] = k.dot(a.row_ptr(i), x.data(), a.cols());
    }
    return y;
}

DenseVector matvec_transposed(const DenseMatrix& a, const DenseVector& x) {
    if (a.rows() != x.dim()) {
        throw std::invalid_argument("matvec_transposed: dimension mismatch");
    }
    const auto& k = kernels::active();
    DenseVector y(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        k.axpy(y.data(), x[i], a.row_ptr(i), a.cols());
    }
    return y;
}

DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            t(j, i) = m(i, j);
        }
    }
    return t;
}

DenseMatrix outer(const DenseVector& u, const DenseVector& v) {
    const auto& k = kernels::active();
    DenseMatrix g(u.dim(), v.dim());
    for (std::size_t i = 0; i < u.dim(); ++i) {
        k.scaled_copy(g.row_ptr(i), u[i], v.data(), v.dim());
    }
    return g;
}

double dot(const DenseVector& a, const DenseVector& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dot: dimension mismatch");
    return kernels::active().dot(a.data(), b.data(), a.dim());
}

double norm2(const double* x, std::size_t n) {
    return std::sqrt(kernels::active().sum_sq(x, n));
}

double norm2(const DenseVector& v) { return norm2(v.data(), v.dim()); }

}  // namespace mdn
