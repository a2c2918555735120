#include "concept_monitor/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/parallel.hpp"
#include "concept_monitor/simd/kernels.hpp"

namespace concept_monitor::detect {
namespace {

void require_probe_match(const MatrixD& q, const MatrixD& p, const char* what) {
    if (q.rows() != p.rows())
        throw InputError(std::string("dimension mismatch: activations have ") + std::to_string(q.rows()) +
                         " probes, " + what + " has " + std::to_string(p.rows()));
}

// log(exp(a) + exp(b))
double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

std::string_view detector_name(DetectorKind k) noexcept {
    switch (k) {
        case DetectorKind::Cos3: return "cos3";
        case DetectorKind::SoftWpmi: return "soft_wpmi";
        case DetectorKind::Iou: return "iou";
    }
    return "cos3";
}

std::optional<DetectorKind> parse_detector(std::string_view name) noexcept {
    for (auto k : {DetectorKind::Cos3, DetectorKind::SoftWpmi, DetectorKind::Iou})
        if (detector_name(k) == name) return k;
    return std::nullopt;
}

DetectorConfig DetectorConfig::defaults(DetectorKind kind) {
    DetectorConfig cfg;
    cfg.kind = kind;
    cfg.tau = kind == DetectorKind::Iou ? 0.04 : 0.1;
    return cfg;
}

std::size_t DetectorConfig::effective_top_k(std::size_t n_probe) const {
    if (top_k) return *top_k;
    return std::max<std::size_t>(1, std::min<std::size_t>(100, n_probe / 10));
}

void DetectorConfig::validate() const {
    if (!std::isfinite(tau)) throw InputError("tau must be finite");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be >= 0");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be > 0");
    if (top_k && *top_k == 0) throw InputError("top-k must be >= 1");
    if (!(steepness > 0.0) || !std::isfinite(steepness)) throw InputError("steepness must be > 0");
    if (!(quantile > 0.0 && quantile < 1.0)) throw InputError("quantile must lie in (0, 1)");
}

// ---------------------------------------------------------------------------
// cos-cubed

CubedColumns prepare_cubed(const MatrixD& m) {
    const std::size_t n = m.rows(), cols = m.cols();
    CubedColumns out{MatrixD(cols, n), MatrixD(cols, n), std::vector<double>(cols, 0.0)};
    parallel_for(cols, 16, [&](std::size_t begin, std::size_t end) {
        std::vector<double> cube(n);
        for (std::size_t j = begin; j < end; ++j) {
            bool constant = true;
            double sum = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                sum += m(k, j);
                if (m(k, j) != m(0, j)) constant = false;
            }
            if (constant) continue;
            const double mean = sum / static_cast<double>(n);
            auto centered = out.centered.row(j);
            for (std::size_t k = 0; k < n; ++k) {
                centered[k] = m(k, j) - mean;
                cube[k] = centered[k] * centered[k] * centered[k];
            }
            const double norm = std::sqrt(simd::dot(cube, cube));
            if (!(norm > 0.0) || !std::isfinite(norm)) continue;
            out.norm[j] = norm;
            auto unit = out.unit.row(j);
            for (std::size_t k = 0; k < n; ++k) unit[k] = cube[k] / norm;
        }
    });
    return out;
}

SimilarityMatrix cos_cubed_sim(const CubedColumns& neurons, const CubedColumns& concepts) {
    if (neurons.unit.cols() != concepts.unit.cols())
        throw InputError("dimension mismatch: activations and probe_sims disagree on probe count");
    MatrixD sims(neurons.unit.rows(), concepts.unit.rows());
    parallel_for(neurons.unit.rows(), 4, [&](std::size_t begin, std::size_t end) {
        simd::gemm_nt(neurons.unit, concepts.unit, begin, end, sims);
    });
    for (double& v : sims.data()) v = std::clamp(v, -1.0, 1.0);
    return {std::move(sims), DetectorConfig::defaults(DetectorKind::Cos3)};
}

SimilarityMatrix cos_cubed_sim(const MatrixD& activations, const MatrixD& probe_sims) {
    require_probe_match(activations, probe_sims, "probe_sims");
    if (activations.rows() < 2) throw InputError("cos3 needs at least 2 probes");
    return cos_cubed_sim(prepare_cubed(activations), prepare_cubed(probe_sims));
}

// ---------------------------------------------------------------------------
// soft-WPMI

MatrixD concept_log_probs(const MatrixD& probe_sims, double gamma) {
    MatrixD out(probe_sims.rows(), probe_sims.cols());
    for (std::size_t k = 0; k < probe_sims.rows(); ++k) {
        auto in = probe_sims.row(k);
        auto lp = out.row(k);
        double hi = -std::numeric_limits<double>::infinity();
        for (double v : in) hi = std::max(hi, v / gamma);
        double z = 0.0;
        for (double v : in) z += std::exp(v / gamma - hi);
        const double log_z = hi + std::log(z);
        for (std::size_t i = 0; i < in.size(); ++i) lp[i] = in[i] / gamma - log_z;
    }
    return out;
}

std::vector<double> concept_log_marginal(const MatrixD& log_probs) {
    const std::size_t n = log_probs.rows();
    std::vector<double> out(log_probs.cols(), 0.0);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double mean = 0.0;
        for (std::size_t k = 0; k < n; ++k) mean += std::exp(log_probs(k, i));
        out[i] = std::log(mean / static_cast<double>(n));
    }
    return out;
}

std::vector<double> inclusion_weights(std::span<const double> column, std::size_t k, double steepness) {
    const std::size_t n = column.size();
    if (k == 0 || k > n)
        throw InputError("top-k " + std::to_string(k) + " out of range for " + std::to_string(n) + " probes");
    std::vector<double> sorted(column.begin(), column.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                     std::greater<>());
    const double theta = sorted[k - 1];
    double mean = 0.0;
    for (double v : column) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : column) var += (v - mean) * (v - mean);
    double sigma = std::sqrt(var / static_cast<double>(n));
    if (!(sigma > 0.0)) sigma = 1.0;
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = 1.0 / (1.0 + std::exp(-steepness * (column[i] - theta) / sigma));
    return s;
}

std::vector<double> soft_wpmi_scores(std::span<const double> inclusion, const MatrixD& log_probs,
                                     std::span<const double> log_marginal, double lambda) {
    const std::size_t n = log_probs.rows(), concepts = log_probs.cols();
    if (inclusion.size() != n || log_marginal.size() != concepts)
        throw InputError("soft-WPMI: dimension mismatch");
    std::vector<double> out(concepts, 0.0);
    for (std::size_t i = 0; i < concepts; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double s = inclusion[k];
            if (s == 0.0) continue;
            // log((1 - s) + s p) evaluated in log space
            const double log_keep = s == 1.0 ? -std::numeric_limits<double>::infinity() : std::log1p(-s);
            sum += log_add_exp(log_keep, std::log(s) + log_probs(k, i));
        }
        out[i] = sum - lambda * log_marginal[i];
    }
    return out;
}

SimilarityMatrix soft_wpmi_sim(const MatrixD& activations, const MatrixD& probe_sims, const DetectorConfig& cfg) {
    cfg.validate();
    require_probe_match(activations, probe_sims, "probe_sims");
    if (activations.rows() < 2) throw InputError("soft-WPMI needs at least 2 probes");
    const std::size_t k = cfg.effective_top_k(activations.rows());
    if (k > activations.rows())
        throw InputError("top-k " + std::to_string(k) + " exceeds probe count " + std::to_string(activations.rows()));
    const MatrixD log_probs = concept_log_probs(probe_sims, cfg.gamma);
    const std::vector<double> log_marginal = concept_log_marginal(log_probs);
    MatrixD sims(activations.cols(), probe_sims.cols());
    parallel_for(activations.cols(), 1, [&](std::size_t begin, std::size_t end) {
        std::vector<double> column(activations.rows());
        for (std::size_t n = begin; n < end; ++n) {
            for (std::size_t r = 0; r < column.size(); ++r) column[r] = activations(r, n);
            const auto s = inclusion_weights(column, k, cfg.steepness);
            const auto scores = soft_wpmi_scores(s, log_probs, log_marginal, cfg.lambda);
            std::copy(scores.begin(), scores.end(), sims.row(n).begin());
        }
    });
    return {std::move(sims), cfg};
}

// ---------------------------------------------------------------------------
// image-level IoU

double activation_threshold(std::span<const double> column, double quantile) {
    const std::size_t n = column.size();
    if (n == 0) throw InputError("empty activation column");
    // small epsilon keeps e.g. q=0.05, N=20 from flooring 0.99999... to 0
    const auto dropped = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(n) + 1e-9));
    const std::size_t rank = std::clamp<std::size_t>(n - std::min(dropped, n), 1, n);
    std::vector<double> sorted(column.begin(), column.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
    return sorted[rank - 1];
}

SimilarityMatrix iou_sim(const MatrixD& activations, const MatrixD& labels, const DetectorConfig& cfg) {
    cfg.validate();
    require_probe_match(activations, labels, "probe_labels");
    for (double v : labels.data())
        if (v != 0.0 && v != 1.0) throw InputError("probe_labels is not binary");
    const std::size_t n_probe = activations.rows(), n_neurons = activations.cols(), n_concepts = labels.cols();

    // Activated indicators (neurons x probes) and labels (concepts x probes); the
    // intersection counts are exact integer sums, so the SIMD product is exact.
    MatrixD active(n_neurons, n_probe);
    std::vector<double> active_count(n_neurons, 0.0);
    parallel_for(n_neurons, 4, [&](std::size_t begin, std::size_t end) {
        std::vector<double> column(n_probe);
        for (std::size_t n = begin; n < end; ++n) {
            for (std::size_t k = 0; k < n_probe; ++k) column[k] = activations(k, n);
            const double theta = activation_threshold(column, cfg.quantile);
            for (std::size_t k = 0; k < n_probe; ++k)
                if (column[k] > theta) {
                    active(n, k) = 1.0;
                    active_count[n] += 1.0;
                }
        }
    });
    const MatrixD label_rows = labels.transposed();
    std::vector<double> label_count(n_concepts, 0.0);
    for (std::size_t i = 0; i < n_concepts; ++i)
        for (double v : label_rows.row(i)) label_count[i] += v;

    MatrixD inter(n_neurons, n_concepts);
    parallel_for(n_neurons, 4, [&](std::size_t begin, std::size_t end) {
        simd::gemm_nt(active, label_rows, begin, end, inter);
    });
    MatrixD sims(n_neurons, n_concepts);
    for (std::size_t n = 0; n < n_neurons; ++n)
        for (std::size_t i = 0; i < n_concepts; ++i) {
            const double uni = active_count[n] + label_count[i] - inter(n, i);
            sims(n, i) = uni > 0.0 ? inter(n, i) / uni : 0.0;
        }
    return {std::move(sims), cfg};
}

// ---------------------------------------------------------------------------

SimilarityMatrix compute_similarity(const MatrixD& activations, const store::ConceptSpace& space,
                                    const DetectorConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case DetectorKind::Cos3: {
            if (!space.probe_sims) throw InputError("cos3 detector requires concepts.probe_sims");
            auto s = cos_cubed_sim(activations, *space.probe_sims);
            s.detector = cfg;
            return s;
        }
        case DetectorKind::SoftWpmi:
            if (!space.probe_sims) throw InputError("soft_wpmi detector requires concepts.probe_sims");
            return soft_wpmi_sim(activations, *space.probe_sims, cfg);
        case DetectorKind::Iou:
            if (!space.probe_labels) throw InputError("iou detector requires concepts.probe_labels");
            return iou_sim(activations, *space.probe_labels, cfg);
    }
    throw InputError("unknown detector");
}

ConceptAssignment assign_concepts(const SimilarityMatrix& sims, const store::ConceptSpace& space,
                                  const DetectorConfig& cfg) {
    if (space.size() == 0) throw InputError("concept space is empty");
    if (sims.values.cols() != space.size())
        throw InputError("similarity matrix has " + std::to_string(sims.values.cols()) + " columns for " +
                         std::to_string(space.size()) + " concepts");
    ConceptAssignment out;
    out.neurons.reserve(sims.values.rows());
    for (std::size_t n = 0; n < sims.values.rows(); ++n) {
        auto row = sims.values.row(n);
        std::size_t best = 0;
        for (std::size_t i = 1; i < row.size(); ++i)
            if (row[i] > row[best]) best = i;
        out.neurons.push_back({best, row[best], row[best] > cfg.tau, space.concepts[best].category});
    }
    return out;
}

}  // namespace concept_monitor::detect
