#pragma once

#include <cstddef>
#include <string>

namespace mdn::kernels {

// Function table for the double-precision inner loops. Two implementations
// exist: a portable scalar reference (kernels_scalar.cpp) and an AVX2 variant
// (kernels_avx2.cpp). Elementwise kernels are bit-identical between the two;
// reductions (dot, sum_sq, abs_sum) may differ by a few ULPs because the
// accumulation order differs.
struct Kernels {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum_sq)(const double* x, std::size_t n);
    double (*abs_sum)(const double* x, std::size_t n);

    // y += a * x
    void (*axpy)(double* y, double a, const double* x, std::size_t n);
    // y = a * x
    void (*scaled_copy)(double* y, double a, const double* x, std::size_t n);
    // x *= a
    void (*scale)(double* x, double a, std::size_t n);
    // acc += x * x (elementwise)
    void (*sq_acc)(double* acc, const double* x, std::size_t n);
    // acc += |x| (elementwise)
    void (*abs_acc)(double* acc, const double* x, std::size_t n);
    // y = x > 0 ? x : 0
    void (*relu)(double* y, const double* x, std::size_t n);
};

const Kernels& scalar();

// AVX2 table, or nullptr when the build or the CPU does not support it.
const Kernels* avx2();
bool avx2_supported();

// Active table: AVX2 when available, scalar otherwise. The environment
// variable MDN_KERNELS=scalar|avx2|auto overrides the default; unknown
// values and unavailable backends fall back to auto.
const Kernels& active();
void select_backend(const std::string& name);

}  // namespace mdn::kernels
