#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "concept_monitor/matrix.hpp"

// Inner-loop arithmetic kernels. Each kernel has a scalar reference version and
// vectorized variants (AVX2+FMA on x86-64, NEON on AArch64); the variant is chosen
// once at runtime from CPU features and can be overridden with
// CONCEPT_MONITOR_SIMD=scalar|avx2|neon or set_isa().
//
// Within one ISA, gemm_nt(i, j) is bit-identical to dot(X.row(i), Y.row(j)) no matter
// how the rows are tiled or split across threads.
namespace concept_monitor::simd {

enum class Isa { Scalar, Avx2, Neon };

[[nodiscard]] std::string_view isa_name(Isa isa) noexcept;
[[nodiscard]] std::optional<Isa> parse_isa(std::string_view name) noexcept;
[[nodiscard]] bool isa_supported(Isa isa) noexcept;
[[nodiscard]] Isa best_isa() noexcept;

[[nodiscard]] Isa active_isa() noexcept;
/// Throws std::invalid_argument if the ISA is not supported on this CPU/build.
void set_isa(Isa isa);

[[nodiscard]] double dot(std::span<const double> a, std::span<const double> b);
[[nodiscard]] double sq_dist(std::span<const double> a, std::span<const double> b);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// C(i, j) = dot(X.row(i), Y.row(j)) for i in [row_begin, row_end) and all j.
/// C must be X.rows() x Y.rows(); X and Y must have equal column counts.
void gemm_nt(const MatrixD& x, const MatrixD& y, std::size_t row_begin, std::size_t row_end,
             MatrixD& c);

/// Raw kernel signatures shared by every ISA implementation.
struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sq_dist)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    void (*gemm_nt)(const double* x, const double* y, std::size_t k, std::size_t row_begin,
                    std::size_t row_end, std::size_t ny, double* c);
};

[[nodiscard]] const KernelTable& kernels_for(Isa isa);

namespace scalar {
extern const KernelTable table;
}
#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
extern const KernelTable table;
}
#endif
#if defined(__aarch64__)
namespace neon {
extern const KernelTable table;
}
#endif

}  // namespace concept_monitor::simd
