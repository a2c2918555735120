#include "concept_monitor/diversity.hpp"

#include <cmath>
#include <string>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/parallel.hpp"
#include "concept_monitor/simd/kernels.hpp"

namespace concept_monitor::diversity {

DiversityReport anchor_distance(const MatrixD& neurons, const MatrixD& anchors) {
    if (neurons.rows() == 0) throw InputError("anchor distance needs at least one neuron");
    if (anchors.rows() == 0) throw InputError("anchor distance needs at least one anchor");
    if (neurons.cols() != anchors.cols())
        throw InputError("embedding dimension mismatch: neurons d=" + std::to_string(neurons.cols()) +
                         ", anchors d=" + std::to_string(anchors.cols()));
    DiversityReport report;
    report.per_anchor.resize(anchors.rows());
    parallel_for(anchors.rows(), 8, [&](std::size_t begin, std::size_t end) {
        for (std::size_t a = begin; a < end; ++a) {
            std::size_t best = 0;
            double best_sq = simd::sq_dist(neurons.row(0), anchors.row(a));
            for (std::size_t j = 1; j < neurons.rows(); ++j) {
                const double sq = simd::sq_dist(neurons.row(j), anchors.row(a));
                if (sq < best_sq) {
                    best_sq = sq;
                    best = j;
                }
            }
            report.per_anchor[a] = {best, std::sqrt(best_sq)};
        }
    });
    double sum = 0.0;
    for (const auto& m : report.per_anchor) sum += m.distance;
    report.d_anchor = sum / static_cast<double>(anchors.rows());
    report.pairwise_diversity = neurons.rows() >= 2 ? pairwise_diversity(neurons) : 0.0;
    return report;
}

DiversityReport anchor_distance(const embed::NeuronEmbeddingSet& neurons, const store::AnchorSet& anchors) {
    return anchor_distance(neurons.embeddings, anchors.embeddings);
}

double pairwise_diversity(const MatrixD& u) {
    const std::size_t n = u.rows();
    if (n < 2) throw InputError("pairwise diversity needs at least 2 neurons");
    std::vector<double> row_sums(n, 0.0);
    parallel_for(n, 4, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            double s = 0.0;
            for (std::size_t k = j + 1; k < n; ++k) s += std::sqrt(simd::sq_dist(u.row(j), u.row(k)));
            row_sums[j] = s;
        }
    });
    double total = 0.0;
    for (double s : row_sums) total += s;
    return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

void RegularizerConfig::validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("beta must be finite and >= 0");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InputError("temperature must be > 0");
}

// ---------------------------------------------------------------------------

AnchorDistanceObjective::AnchorDistanceObjective(const MatrixD& probe_sims, MatrixD concept_embeddings,
                                                 MatrixD anchor_embeddings, double temperature)
    : concepts_(detect::prepare_cubed(probe_sims)),
      concept_embeddings_(std::move(concept_embeddings)),
      anchor_embeddings_(std::move(anchor_embeddings)),
      temperature_(temperature) {
    if (probe_sims.rows() < 2) throw InputError("regularizer needs at least 2 probes");
    if (concept_embeddings_.rows() != probe_sims.cols())
        throw InputError("probe_sims columns do not match concept embeddings");
    if (anchor_embeddings_.cols() != concept_embeddings_.cols())
        throw InputError("embedding dimension mismatch between concepts and anchors");
    embed::EmbeddingConfig{temperature_}.validate();
}

double AnchorDistanceObjective::value(const MatrixD& q) const {
    if (q.rows() != probe_count()) throw InputError("activations have the wrong probe count");
    const auto sims = detect::cos_cubed_sim(detect::prepare_cubed(q), concepts_);
    const auto emb = embed::neuron_embeddings(sims.values, concept_embeddings_, {temperature_});
    return anchor_distance(emb.embeddings, anchor_embeddings_).d_anchor;
}

ValueAndGradient AnchorDistanceObjective::evaluate(const MatrixD& q) const {
    if (q.rows() != probe_count()) throw InputError("activations have the wrong probe count");
    const std::size_t n_probe = q.rows(), n_neurons = q.cols();
    const std::size_t n_concepts = concept_embeddings_.rows(), d = concept_embeddings_.cols();
    const std::size_t n_anchors = anchor_embeddings_.rows();

    const auto neurons = detect::prepare_cubed(q);
    const auto sims = detect::cos_cubed_sim(neurons, concepts_);
    const auto emb = embed::neuron_embeddings(sims.values, concept_embeddings_, {temperature_});
    const auto report = anchor_distance(emb.embeddings, anchor_embeddings_);

    ValueAndGradient out{report.d_anchor, MatrixD(n_probe, n_neurons)};

    // d/du_j of the mean of nearest distances
    MatrixD grad_u(n_neurons, d);
    std::vector<char> touched(n_neurons, 0);
    for (std::size_t a = 0; a < n_anchors; ++a) {
        const auto& m = report.per_anchor[a];
        if (m.distance == 0.0) continue;
        const double scale = 1.0 / (m.distance * static_cast<double>(n_anchors));
        auto g = grad_u.row(m.neuron);
        auto u = emb.embeddings.row(m.neuron);
        auto anchor = anchor_embeddings_.row(a);
        for (std::size_t k = 0; k < d; ++k) g[k] += scale * (u[k] - anchor[k]);
        touched[m.neuron] = 1;
    }

    parallel_for(n_neurons, 1, [&](std::size_t begin, std::size_t end) {
        std::vector<double> grad_sim(n_concepts), z(n_probe), grad_c(n_probe);
        for (std::size_t j = begin; j < end; ++j) {
            if (!touched[j] || neurons.norm[j] == 0.0) continue;
            // through the softmax
            auto w = emb.weights.row(j);
            double mean = 0.0;
            for (std::size_t i = 0; i < n_concepts; ++i) {
                grad_sim[i] = simd::dot(concept_embeddings_.row(i), grad_u.row(j));
                mean += w[i] * grad_sim[i];
            }
            for (std::size_t i = 0; i < n_concepts; ++i) grad_sim[i] = w[i] * (grad_sim[i] - mean) / temperature_;
            // through the cosine against unit concept vectors
            std::fill(z.begin(), z.end(), 0.0);
            for (std::size_t i = 0; i < n_concepts; ++i)
                if (grad_sim[i] != 0.0) simd::axpy(grad_sim[i], concepts_.unit.row(i), z);
            auto unit = neurons.unit.row(j);
            const double along = simd::dot(z, unit);
            // through the cube and the centering
            auto c = neurons.centered.row(j);
            double mean_gc = 0.0;
            for (std::size_t k = 0; k < n_probe; ++k) {
                const double grad_x = (z[k] - along * unit[k]) / neurons.norm[j];
                grad_c[k] = 3.0 * c[k] * c[k] * grad_x;
                mean_gc += grad_c[k];
            }
            mean_gc /= static_cast<double>(n_probe);
            for (std::size_t k = 0; k < n_probe; ++k) out.gradient(k, j) = grad_c[k] - mean_gc;
        }
    });
    return out;
}

ValueAndGradient anchor_distance_grad(const MatrixD& activations, const MatrixD& probe_sims,
                                      const store::ConceptSpace& space, const store::AnchorSet& anchors,
                                      const RegularizerConfig& cfg) {
    cfg.validate();
    if (activations.rows() != probe_sims.rows())
        throw InputError("dimension mismatch: activations and probe_sims disagree on probe count");
    if (activations.rows() < 2) throw InputError("regularizer needs at least 2 probes");
    AnchorDistanceObjective objective(probe_sims, space.embeddings, anchors.embeddings, cfg.temperature);
    return objective.evaluate(activations);
}

std::vector<SweepPoint> temperature_sweep(const MatrixD& sims, const MatrixD& concept_embeddings,
                                          const MatrixD& anchor_embeddings, std::span<const double> temperatures) {
    if (temperatures.empty()) throw InputError("temperature sweep needs at least one temperature");
    for (double t : temperatures) embed::EmbeddingConfig{t}.validate();
    std::vector<SweepPoint> out;
    out.reserve(temperatures.size());
    for (double t : temperatures) {
        const auto emb = embed::neuron_embeddings(sims, concept_embeddings, {t});
        out.push_back({t, anchor_distance(emb.embeddings, anchor_embeddings).d_anchor});
    }
    return out;
}

}  // namespace concept_monitor::diversity
