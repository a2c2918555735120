#include "concept_monitor/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/parallel.hpp"
#include "concept_monitor/simd/kernels.hpp"

namespace concept_monitor::embed {

void EmbeddingConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw InputError("temperature must be finite and > 0");
}

std::vector<double> softmax_weights(std::span<const double> sims, double temperature) {
    if (sims.empty()) throw InputError("softmax over an empty similarity row");
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw InputError("temperature must be finite and > 0");
    const double hi = *std::max_element(sims.begin(), sims.end());
    std::vector<double> w(sims.size());
    double z = 0.0;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        w[i] = std::exp((sims[i] - hi) / temperature);
        z += w[i];
    }
    for (double& v : w) v /= z;
    return w;
}

NeuronEmbeddingSet neuron_embeddings(const MatrixD& sims, const MatrixD& concept_embeddings,
                                     const EmbeddingConfig& cfg) {
    cfg.validate();
    if (sims.cols() != concept_embeddings.rows())
        throw InputError("dimension mismatch: " + std::to_string(sims.cols()) + " similarity columns for " +
                         std::to_string(concept_embeddings.rows()) + " concept embeddings");
    const std::size_t n = sims.rows(), d = concept_embeddings.cols();
    NeuronEmbeddingSet out{MatrixD(n, d), MatrixD(n, sims.cols()), {}};
    parallel_for(n, 8, [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const auto w = softmax_weights(sims.row(j), cfg.temperature);
            std::copy(w.begin(), w.end(), out.weights.row(j).begin());
            auto u = out.embeddings.row(j);
            for (std::size_t i = 0; i < w.size(); ++i)
                if (w[i] != 0.0) simd::axpy(w[i], concept_embeddings.row(i), u);
        }
    });
    return out;
}

NeuronEmbeddingSet neuron_embeddings(const MatrixD& sims, const store::ConceptSpace& space,
                                     const EmbeddingConfig& cfg) {
    return neuron_embeddings(sims, space.embeddings, cfg);
}

std::vector<double> embed_anchor(std::string_view word, const store::AnchorSet& anchors) {
    for (std::size_t i = 0; i < anchors.words.size(); ++i)
        if (anchors.words[i] == word) {
            auto row = anchors.embeddings.row(i);
            return {row.begin(), row.end()};
        }
    std::string available;
    for (const auto& w : anchors.words) available += (available.empty() ? "" : ", ") + w;
    throw InputError("anchor not found: '" + std::string(word) + "' (available: " + available + ")");
}

MatrixD stack_rows(const MatrixD& a, const MatrixD& b) {
    if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols())
        throw InputError("cannot stack rows of width " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.cols()));
    const std::size_t cols = a.rows() > 0 ? a.cols() : b.cols();
    MatrixD out(a.rows() + b.rows(), cols);
    auto dst = out.data();
    std::copy(a.data().begin(), a.data().end(), dst.begin());
    std::copy(b.data().begin(), b.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

}  // namespace concept_monitor::embed
