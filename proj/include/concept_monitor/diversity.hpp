#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "concept_monitor/detectors.hpp"
#include "concept_monitor/embedding.hpp"
#include "concept_monitor/matrix.hpp"
#include "concept_monitor/tensor_store.hpp"

namespace concept_monitor::diversity {

struct AnchorMatch {
    std::size_t neuron = 0;  // nearest neuron, lowest index on ties
    double distance = 0.0;
};

struct DiversityReport {
    double d_anchor = 0.0;  // mean over anchors of the nearest-neuron distance
    std::vector<AnchorMatch> per_anchor;
    double pairwise_diversity = 0.0;  // 0 when fewer than two neurons
};

/// Mean over anchors of min_j ||u_j - a||; also fills pairwise diversity.
[[nodiscard]] DiversityReport anchor_distance(const MatrixD& neuron_embeddings, const MatrixD& anchor_embeddings);
[[nodiscard]] DiversityReport anchor_distance(const embed::NeuronEmbeddingSet& neurons,
                                              const store::AnchorSet& anchors);

/// Mean over unordered pairs of ||u_j - u_k||. Needs at least two neurons.
[[nodiscard]] double pairwise_diversity(const MatrixD& neuron_embeddings);

struct RegularizerConfig {
    double beta = 1.0;
    double temperature = 0.01;
    void validate() const;
};

struct ValueAndGradient {
    double value = 0.0;
    MatrixD gradient;  // same shape as the activations
};

/// d_anchor as a differentiable function of activations Q (N_probe x N_neurons):
/// cos3 similarities against P, softmax(sim / T) weights over concept embeddings,
/// then the anchor distance. The concept side is prepared once.
///
/// Gradient conventions: each anchor's nearest neuron is held fixed (lowest index on
/// ties); an anchor at distance exactly 0 contributes nothing; constant activation
/// columns have zero similarity and zero gradient.
class AnchorDistanceObjective {
public:
    AnchorDistanceObjective(const MatrixD& probe_sims, MatrixD concept_embeddings, MatrixD anchor_embeddings,
                            double temperature);

    [[nodiscard]] double value(const MatrixD& activations) const;
    [[nodiscard]] ValueAndGradient evaluate(const MatrixD& activations) const;

    [[nodiscard]] std::size_t probe_count() const noexcept { return concepts_.unit.cols(); }

private:
    detect::CubedColumns concepts_;
    MatrixD concept_embeddings_;
    MatrixD anchor_embeddings_;
    double temperature_;
};

[[nodiscard]] ValueAndGradient anchor_distance_grad(const MatrixD& activations, const MatrixD& probe_sims,
                                                    const store::ConceptSpace& space,
                                                    const store::AnchorSet& anchors, const RegularizerConfig& cfg);

struct SweepPoint {
    double temperature = 0.0;
    double d_anchor = 0.0;
};

/// d_anchor for each temperature over shared similarities, in input order.
[[nodiscard]] std::vector<SweepPoint> temperature_sweep(const MatrixD& sims, const MatrixD& concept_embeddings,
                                                        const MatrixD& anchor_embeddings,
                                                        std::span<const double> temperatures);

}  // namespace concept_monitor::diversity
