// Compiled with -mavx2 -mfma; only reached after a runtime CPU feature check.
#include "concept_monitor/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace concept_monitor::simd::avx2 {
namespace {

// Dot products are accumulated per block of kBlock elements: one 4-lane FMA
// accumulator over the vector part, a fixed horizontal sum, then the scalar tail.
// Block partial sums are added to the running total in order.
constexpr std::size_t kBlock = 256;

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d pair = _mm_add_pd(lo, hi);  // (a0+a2, a1+a3)
    return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

inline double block_tail(const double* a, const double* b, std::size_t from, std::size_t to,
                         double s) {
    for (std::size_t k = from; k < to; ++k) s = std::fma(a[k], b[k], s);
    return s;
}

double dot(const double* a, const double* b, std::size_t n) {
    double total = 0.0;
    for (std::size_t k0 = 0; k0 < n; k0 += kBlock) {
        const std::size_t k1 = std::min(n, k0 + kBlock);
        const std::size_t kv = k0 + ((k1 - k0) & ~std::size_t{3});
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t k = k0; k < kv; k += 4)
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k), acc);
        total += block_tail(a, b, kv, k1, hsum(acc));
    }
    return total;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t nv = n & ~std::size_t{3};
    for (std::size_t k = 0; k < nv; k += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (std::size_t k = nv; k < n; ++k) {
        const double d = a[k] - b[k];
        s = std::fma(d, d, s);
    }
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const std::size_t nv = n & ~std::size_t{3};
    for (std::size_t k = 0; k < nv; k += 4)
        _mm256_storeu_pd(y + k, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + k), _mm256_loadu_pd(y + k)));
    for (std::size_t k = nv; k < n; ++k) y[k] = std::fma(alpha, x[k], y[k]);
}

// R x C register tile; per-pair operation order matches dot().
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
        const std::size_t kv = k0 + ((k1 - k0) & ~std::size_t{3});
        __m256d acc[R][C];
        for (int r = 0; r < R; ++r)
            for (int q = 0; q < C; ++q) acc[r][q] = _mm256_setzero_pd();
        for (std::size_t kk = k0; kk < kv; kk += 4) {
            __m256d yv[C];
            for (int q = 0; q < C; ++q) yv[q] = _mm256_loadu_pd(yr[q] + kk);
            for (int r = 0; r < R; ++r) {
                const __m256d xv = _mm256_loadu_pd(xr[r] + kk);
                for (int q = 0; q < C; ++q) acc[r][q] = _mm256_fmadd_pd(xv, yv[q], acc[r][q]);
            }
        }
        for (int r = 0; r < R; ++r)
            for (int q = 0; q < C; ++q)
                total[r][q] += block_tail(xr[r], yr[q], kv, k1, hsum(acc[r][q]));
    }
    for (int r = 0; r < R; ++r)
        for (int q = 0; q < C; ++q) c[(i0 + r) * ny + j0 + q] = total[r][q];
}

template <int R>
void row_strip(const double* x, const double* y, std::size_t k, std::size_t i0, std::size_t ny,
               double* c) {
    std::size_t j = 0;
    for (; j + 2 <= ny; j += 2) tile<R, 2>(x, y, k, i0, j, ny, c);
    if (j < ny) tile<R, 1>(x, y, k, i0, j, ny, c);
}

void gemm_nt(const double* x, const double* y, std::size_t k, std::size_t row_begin,
             std::size_t row_end, std::size_t ny, double* c) {
    std::size_t i = row_begin;
    for (; i + 4 <= row_end; i += 4) row_strip<4>(x, y, k, i, ny, c);
    switch (row_end - i) {
        case 3: row_strip<3>(x, y, k, i, ny, c); break;
        case 2: row_strip<2>(x, y, k, i, ny, c); break;
        case 1: row_strip<1>(x, y, k, i, ny, c); break;
        default: break;
    }
}

}  // namespace

const KernelTable table{dot, sq_dist, axpy, gemm_nt};

}  // namespace concept_monitor::simd::avx2
