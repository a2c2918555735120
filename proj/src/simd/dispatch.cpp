#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "concept_monitor/simd/kernels.hpp"

namespace concept_monitor::simd {
namespace {

Isa initial_isa() {
    if (const char* env = std::getenv("CONCEPT_MONITOR_SIMD")) {
        if (auto isa = parse_isa(env); isa && isa_supported(*isa)) return *isa;
    }
    return best_isa();
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

void check_same_cols(const MatrixD& a, const MatrixD& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("kernel operand widths differ: " + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.cols()));
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
    if (name == "scalar") return Isa::Scalar;
    if (name == "avx2") return Isa::Avx2;
    if (name == "neon") return Isa::Neon;
    return std::nullopt;
}

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::Neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Isa best_isa() noexcept {
    if (isa_supported(Isa::Avx2)) return Isa::Avx2;
    if (isa_supported(Isa::Neon)) return Isa::Neon;
    return Isa::Scalar;
}

Isa active_isa() noexcept { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (!isa_supported(isa))
        throw std::invalid_argument("SIMD variant not supported here: " + std::string(isa_name(isa)));
    current().store(isa, std::memory_order_relaxed);
}

const KernelTable& kernels_for(Isa isa) {
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::Avx2: return avx2::table;
#endif
#if defined(__aarch64__)
        case Isa::Neon: return neon::table;
#endif
        default: return scalar::table;
    }
}

namespace {
const KernelTable& active() { return kernels_for(active_isa()); }
}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    return active().dot(a.data(), b.data(), a.size());
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("sq_dist: length mismatch");
    return active().sq_dist(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
    active().axpy(alpha, x.data(), y.data(), x.size());
}

void gemm_nt(const MatrixD& x, const MatrixD& y, std::size_t row_begin, std::size_t row_end,
             MatrixD& c) {
    check_same_cols(x, y);
    if (c.rows() != x.rows() || c.cols() != y.rows())
        throw std::invalid_argument("gemm_nt: output shape mismatch");
    if (row_begin > row_end || row_end > x.rows()) throw std::invalid_argument("gemm_nt: bad row range");
    active().gemm_nt(x.data().data(), y.data().data(), x.cols(), row_begin, row_end, y.rows(),
                     c.data().data());
}

}  // namespace concept_monitor::simd
