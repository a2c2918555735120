// AArch64 only; NEON (Advanced SIMD) is mandatory there, so no runtime probe is needed.
#include "concept_monitor/simd/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include <algorithm>
#include <cmath>

namespace concept_monitor::simd::neon {
namespace {

constexpr std::size_t kBlock = 256;

inline double block_tail(const double* a, const double* b, std::size_t from, std::size_t to,
                         double s) {
    for (std::size_t k = from; k < to; ++k) s = std::fma(a[k], b[k], s);
    return s;
}

double dot(const double* a, const double* b, std::size_t n) {
    double total = 0.0;
    for (std::size_t k0 = 0; k0 < n; k0 += kBlock) {
        const std::size_t k1 = std::min(n, k0 + kBlock);
        const std::size_t kv = k0 + ((k1 - k0) & ~std::size_t{1});
        float64x2_t acc = vdupq_n_f64(0.0);
        for (std::size_t k = k0; k < kv; k += 2) acc = vfmaq_f64(acc, vld1q_f64(a + k), vld1q_f64(b + k));
        total += block_tail(a, b, kv, k1, vaddvq_f64(acc));
    }
    return total;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    const std::size_t nv = n & ~std::size_t{1};
    for (std::size_t k = 0; k < nv; k += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(a + k), vld1q_f64(b + k));
        acc = vfmaq_f64(acc, d, d);
    }
    double s = vaddvq_f64(acc);
    for (std::size_t k = nv; k < n; ++k) {
        const double d = a[k] - b[k];
        s = std::fma(d, d, s);
    }
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    const std::size_t nv = n & ~std::size_t{1};
    for (std::size_t k = 0; k < nv; k += 2) vst1q_f64(y + k, vfmaq_f64(vld1q_f64(y + k), va, vld1q_f64(x + k)));
    for (std::size_t k = nv; k < n; ++k) y[k] = std::fma(alpha, x[k], y[k]);
}

template <int R, int C>
void tile(const double* x, const double* y, std::size_t k, std::size_t i0, std::size_t j0,
          std::size_t ny, double* c) {
    const double* xr[R];
    const double* yr[C];
    for (int r = 0; r < R; ++r) xr[r] = x + (i0 + r) * k;
    for (int q = 0; q < C; ++q) yr[q] = y + (j0 + q) * k;
    double total[R][C] = {};
    for (std::size_t k0 = 0; k0 < k; k0 += kBlock) {
        const std::size_t k1 = std::min(k, k0 + kBlock);
        const std::size_t kv = k0 + ((k1 - k0) & ~std::size_t{1});
        float64x2_t acc[R][C];
        for (int r = 0; r < R; ++r)
            for (int q = 0; q < C; ++q) acc[r][q] = vdupq_n_f64(0.0);
        for (std::size_t kk = k0; kk < kv; kk += 2) {
            float64x2_t yv[C];
            for (int q = 0; q < C; ++q) yv[q] = vld1q_f64(yr[q] + kk);
            for (int r = 0; r < R; ++r) {
                const float64x2_t xv = vld1q_f64(xr[r] + kk);
                for (int q = 0; q < C; ++q) acc[r][q] = vfmaq_f64(acc[r][q], xv, yv[q]);
            }
        }
        for (int r = 0; r < R; ++r)
            for (int q = 0; q < C; ++q)
                total[r][q] += block_tail(xr[r], yr[q], kv, k1, vaddvq_f64(acc[r][q]));
    }
    for (int r = 0; r < R; ++r)
        for (int q = 0; q < C; ++q) c[(i0 + r) * ny + j0 + q] = total[r][q];
}

template <int R>
void row_strip(const double* x, const double* y, std::size_t k, std::size_t i0, std::size_t ny,
               double* c) {
    std::size_t j = 0;
    for (; j + 4 <= ny; j += 4) tile<R, 4>(x, y, k, i0, j, ny, c);
    for (; j < ny; ++j) tile<R, 1>(x, y, k, i0, j, ny, c);
}

void gemm_nt(const double* x, const double* y, std::size_t k, std::size_t row_begin,
             std::size_t row_end, std::size_t ny, double* c) {
    std::size_t i = row_begin;
    for (; i + 4 <= row_end; i += 4) row_strip<4>(x, y, k, i, ny, c);
    for (; i < row_end; ++i) row_strip<1>(x, y, k, i, ny, c);
}

}  // namespace

const KernelTable table{dot, sq_dist, axpy, gemm_nt};

}  // namespace concept_monitor::simd::neon
#endif
