#pragma once

#include <cstddef>
#include <vector>

namespace mdn {

// Row-major dense matrix of doubles, the only numeric container in the
// library. Constructors taking data reject non-finite entries and zero
// dimensions.
class DenseMatrix {
public:
    DenseMatrix(std::size_t rows, std::size_t cols);  // zero-filled
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

class DenseVector {
public:
    explicit DenseVector(std::size_t dim);  // zero-filled
    explicit DenseVector(std::vector<double> data);

    std::size_t dim() const { return data_.size(); }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

private:
    std::vector<double> data_;
};

// C = A B. Throws on inner-dimension mismatch.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

// y = A x and y = A^T x.
DenseVector matvec(const DenseMatrix& a, const DenseVector& x);
DenseVector matvec_transposed(const DenseMatrix& a, const DenseVector& x);

DenseMatrix transpose(const DenseMatrix& m);

// G = u v^T.
DenseMatrix outer(const DenseVector& u, const DenseVector& v);

double dot(const DenseVector& a, const DenseVector& b);
double norm2(const DenseVector& v);
double norm2(const double* x, std::size_t n);

}  // namespace mdn
