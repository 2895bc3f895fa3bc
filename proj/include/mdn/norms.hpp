#pragma once

#include "mdn/matrix.hpp"

namespace mdn {

// The grouped norms fix column grouping: a "unit" is a column. Pass
// transpose_first=true to group by rows instead.
enum class MatrixNorm {
    spectral,   // largest singular value, power iteration on M^T M
    frobenius,  // sqrt(sum of squares)
    two_one,    // sum over columns of column l2 norms
    one_two,    // l2 norm of the vector of column l1 norms
    one_inf,    // max over rows of row l1 norm
};

double matrix_norm(const DenseMatrix& m, MatrixNorm kind, bool transpose_first = false);

}  // namespace mdn
