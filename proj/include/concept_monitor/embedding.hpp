#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "concept_monitor/matrix.hpp"
#include "concept_monitor/tensor_store.hpp"

namespace concept_monitor::embed {

struct EmbeddingConfig {
    double temperature = 0.01;
    void validate() const;
};

/// exp(sim_i / T) / sum_j exp(sim_j / T), evaluated with max subtraction.
[[nodiscard]] std::vector<double> softmax_weights(std::span<const double> sims, double temperature);

/// Neuron embeddings u_n = sum_i w_i(n) v_i: convex combinations of concept embeddings.
struct NeuronEmbeddingSet {
    MatrixD embeddings;  // N_neurons x d
    MatrixD weights;     // N_neurons x |S|, rows sum to 1
    std::string checkpoint;
};

[[nodiscard]] NeuronEmbeddingSet neuron_embeddings(const MatrixD& sims, const MatrixD& concept_embeddings,
                                                   const EmbeddingConfig& cfg);
[[nodiscard]] NeuronEmbeddingSet neuron_embeddings(const MatrixD& sims, const store::ConceptSpace& space,
                                                   const EmbeddingConfig& cfg);

/// Stored embedding row for an anchor word; InputError "anchor not found" otherwise.
[[nodiscard]] std::vector<double> embed_anchor(std::string_view word, const store::AnchorSet& anchors);

/// Fitted 2D linear projection: coordinates = (p - mean) . directions.
struct Projection2D {
    MatrixD coordinates;                 // N_points x 2
    std::vector<double> mean;            // d
    MatrixD directions;                  // 2 x d, orthonormal rows
    std::array<double, 2> explained_variance{};

    [[nodiscard]] MatrixD project(const MatrixD& points) const;
};

class Projector {
public:
    virtual ~Projector() = default;
    [[nodiscard]] virtual Projection2D fit(const MatrixD& points) const = 0;
};

/// Top-2 principal components. Each axis is oriented so that the fitted point with
/// the largest |coordinate| (lowest index on ties) lies on the positive side.
class PcaProjector final : public Projector {
public:
    [[nodiscard]] Projection2D fit(const MatrixD& points) const override;
};

[[nodiscard]] Projection2D project_2d(const MatrixD& points);

/// Rows of `a` followed by rows of `b`.
[[nodiscard]] MatrixD stack_rows(const MatrixD& a, const MatrixD& b);

}  // namespace concept_monitor::embed
