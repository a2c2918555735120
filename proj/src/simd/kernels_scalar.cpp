#include "concept_monitor/simd/kernels.hpp"

namespace concept_monitor::simd::scalar {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += a[k] * b[k];
    return sum;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = a[k] - b[k];
        sum += d * d;
    }
    return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

void gemm_nt(const double* x, const double* y, std::size_t k, std::size_t row_begin,
             std::size_t row_end, std::size_t ny, double* c) {
    for (std::size_t i = row_begin; i < row_end; ++i)
        for (std::size_t j = 0; j < ny; ++j) c[i * ny + j] = dot(x + i * k, y + j * k, k);
}

}  // namespace

const KernelTable table{dot, sq_dist, axpy, gemm_nt};

}  // namespace concept_monitor::simd::scalar
