#include "usln/kernels.hpp"

#include <cmath>

namespace usln::kernels {
namespace {

void add_scalar(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void mul_scalar(const double* a, const double* b, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void scale_scalar(const double* a, double k, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = k * a[i];
}

void axpy_scalar(double k, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += k * x[i];
}

double sum_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double abs_diff_sum_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(a[i] - b[i]);
    return acc;
}

double sq_diff_sum_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table = {
        "scalar",        add_scalar,          mul_scalar, scale_scalar,
        axpy_scalar,     sum_scalar,          dot_scalar, abs_diff_sum_scalar,
        sq_diff_sum_scalar,
    };
    return table;
}

std::size_t argmax(const double* a, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (a[i] > a[best]) best = i;
    return best;
}

std::size_t argmin(const double* a, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (a[i] < a[best]) best = i;
    return best;
}

}  // namespace usln::kernels
