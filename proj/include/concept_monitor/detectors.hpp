#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "concept_monitor/matrix.hpp"
#include "concept_monitor/tensor_store.hpp"

namespace concept_monitor::detect {

enum class DetectorKind { Cos3, SoftWpmi, Iou };

[[nodiscard]] std::string_view detector_name(DetectorKind k) noexcept;
[[nodiscard]] std::optional<DetectorKind> parse_detector(std::string_view name) noexcept;

struct DetectorConfig {
    DetectorKind kind = DetectorKind::Cos3;
    double tau = 0.1;  // interpretable iff best similarity > tau
    // soft-WPMI
    double lambda = 1.0;
    double gamma = 0.05;
    std::optional<std::size_t> top_k;  // unset: min(100, N_probe / 10), at least 1
    double steepness = 10.0;
    // IoU
    double quantile = 0.05;

    /// Defaults for a detector: tau 0.1 for cos3 and soft-WPMI, 0.04 for IoU.
    static DetectorConfig defaults(DetectorKind kind);
    [[nodiscard]] std::size_t effective_top_k(std::size_t n_probe) const;
    /// Throws InputError on out-of-range parameters.
    void validate() const;
};

/// sim(n, i) for every neuron n (rows) and concept i (columns).
struct SimilarityMatrix {
    MatrixD values;
    DetectorConfig detector;
};

struct NeuronConcept {
    std::size_t concept_index = 0;
    double similarity = 0.0;
    bool interpretable = false;
    store::Category category = store::Category::Other;
};

struct ConceptAssignment {
    std::vector<NeuronConcept> neurons;
};

/// Columns of an N_probe x M matrix, mean-centered, cubed element-wise, and scaled
/// to unit norm, stored as rows (M x N_probe). Constant columns become zero rows.
struct CubedColumns {
    MatrixD centered;  // M x N_probe, centered (not cubed)
    MatrixD unit;      // M x N_probe
    std::vector<double> norm;  // ||centered^3||, 0 for constant columns
};

[[nodiscard]] CubedColumns prepare_cubed(const MatrixD& m);

/// cos(center(Q[:,n])^3, center(P[:,i])^3); 0 whenever either column is constant.
[[nodiscard]] SimilarityMatrix cos_cubed_sim(const MatrixD& activations, const MatrixD& probe_sims);
[[nodiscard]] SimilarityMatrix cos_cubed_sim(const CubedColumns& neurons, const CubedColumns& concepts);

// soft-WPMI building blocks
/// Row-wise softmax of P / gamma, returned as log-probabilities (N_probe x |S|).
[[nodiscard]] MatrixD concept_log_probs(const MatrixD& probe_sims, double gamma);
/// log of the mean over probes of the concept probabilities.
[[nodiscard]] std::vector<double> concept_log_marginal(const MatrixD& log_probs);
/// s_k = logistic(a (q_k - theta) / sigma), theta the K-th largest activation,
/// sigma the population standard deviation (1 if zero).
[[nodiscard]] std::vector<double> inclusion_weights(std::span<const double> column, std::size_t k,
                                                    double steepness);
/// sum_k log(1 - s_k + s_k p(i|k)) - lambda log pbar(i), for every concept i.
[[nodiscard]] std::vector<double> soft_wpmi_scores(std::span<const double> inclusion,
                                                   const MatrixD& log_probs,
                                                   std::span<const double> log_marginal, double lambda);

[[nodiscard]] SimilarityMatrix soft_wpmi_sim(const MatrixD& activations, const MatrixD& probe_sims,
                                             const DetectorConfig& cfg);

/// Nearest-rank (1 - q) quantile of the column; rank = N - floor(q N), clamped to [1, N].
[[nodiscard]] double activation_threshold(std::span<const double> column, double quantile);

/// Image-level IoU between {k : Q[k,n] > threshold} and {k : C[k,i] = 1}; 0 if both empty.
[[nodiscard]] SimilarityMatrix iou_sim(const MatrixD& activations, const MatrixD& labels,
                                       const DetectorConfig& cfg);

/// Dispatches on cfg.kind using the probe inputs held by the concept space.
[[nodiscard]] SimilarityMatrix compute_similarity(const MatrixD& activations, const store::ConceptSpace& space,
                                                  const DetectorConfig& cfg);

/// argmax per neuron (lowest index wins ties), interpretable iff best > tau.
[[nodiscard]] ConceptAssignment assign_concepts(const SimilarityMatrix& sims, const store::ConceptSpace& space,
                                                const DetectorConfig& cfg);

}  // namespace concept_monitor::detect
