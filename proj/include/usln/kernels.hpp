#pragma once

#include <cstddef>

// Data-parallel inner loops used by the tensor ops, the losses and the
// metrics. Every routine exists as a portable scalar reference and, on
// x86-64 with AVX2, as a vectorized variant. The active table is chosen
// once at startup; set USLN_KERNELS=scalar (or avx2) to force a variant.
//
// Elementwise routines (add/mul/scale/axpy) are bit-identical between
// variants. Reductions (sum/dot/...) reassociate and may differ in the
// last few ulps.

namespace usln::kernels {

struct KernelTable {
    const char* name;

    // dst[i] = a[i] + b[i]
    void (*add)(const double* a, const double* b, double* dst, std::size_t n);
    // dst[i] = a[i] * b[i]
    void (*mul)(const double* a, const double* b, double* dst, std::size_t n);
    // dst[i] = k * a[i]
    void (*scale)(const double* a, double k, double* dst, std::size_t n);
    // y[i] += k * x[i]
    void (*axpy)(double k, const double* x, double* y, std::size_t n);

    double (*sum)(const double* a, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum of |a[i] - b[i]|
    double (*abs_diff_sum)(const double* a, const double* b, std::size_t n);
    // sum of (a[i] - b[i])^2
    double (*sq_diff_sum)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();

// Null when this build or CPU lacks AVX2.
const KernelTable* avx2_table();

// Table selected at startup (honors USLN_KERNELS).
const KernelTable& active();

// First-occurrence extrema; deliberately scalar so tie-breaking is exact.
std::size_t argmax(const double* a, std::size_t n);
std::size_t argmin(const double* a, std::size_t n);

}  // namespace usln::kernels
