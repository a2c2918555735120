#include "concept_monitor/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/parallel.hpp"

namespace concept_monitor::telemetry {
namespace {

std::string snapshot_label(const Snapshot& s) {
    return s.run_id + ":" + s.layer + "@" + std::to_string(s.epoch);
}

}  // namespace

CategoryStats category_stats(const detect::ConceptAssignment& assignment) {
    if (assignment.neurons.empty()) throw InputError("category statistics need at least one neuron");
    CategoryStats stats;
    stats.total = assignment.neurons.size();
    for (std::size_t c = 0; c < store::kCategoryCount; ++c) stats.per_category[c].category = store::kAllCategories[c];
    for (const auto& n : assignment.neurons) {
        if (!n.interpretable) continue;
        ++stats.per_category[static_cast<std::size_t>(n.category)].count;
        ++stats.interpretable;
    }
    const double total = static_cast<double>(stats.total);
    for (auto& c : stats.per_category) c.percentage = 100.0 * static_cast<double>(c.count) / total;
    stats.interpretable_percentage = 100.0 * static_cast<double>(stats.interpretable) / total;
    return stats;
}

std::vector<std::size_t> top_activating(const MatrixD& activations, std::size_t neuron, std::size_t k) {
    const std::size_t n = activations.rows();
    if (k == 0 || k > n)
        throw InputError("top-k " + std::to_string(k) + " out of range for " + std::to_string(n) + " probes");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double va = activations(a, neuron), vb = activations(b, neuron);
                          return va > vb || (va == vb && a < b);
                      });
    idx.resize(k);
    return idx;
}

Snapshot make_snapshot(const MatrixD& activations, const store::ConceptSpace& space, const store::AnchorSet& anchors,
                       const AnalysisConfig& cfg, const SnapshotMeta& meta) {
    if (cfg.top_k == 0 || cfg.top_k > activations.rows())
        throw InputError("top-k " + std::to_string(cfg.top_k) + " out of range for " +
                         std::to_string(activations.rows()) + " probes");
    if (anchors.dim() != space.dim())
        throw InputError("embedding dimension mismatch: concepts d=" + std::to_string(space.dim()) +
                         ", anchors d=" + std::to_string(anchors.dim()));
    const auto sims = detect::compute_similarity(activations, space, cfg.detector);
    const auto assignment = detect::assign_concepts(sims, space, cfg.detector);
    const auto emb = embed::neuron_embeddings(sims.values, space, cfg.embedding);
    const auto div = diversity::anchor_distance(emb, anchors);
    const auto proj = embed::project_2d(embed::stack_rows(emb.embeddings, anchors.embeddings));

    Snapshot s;
    s.run_id = meta.run_id;
    s.layer = meta.layer;
    s.epoch = meta.epoch;
    s.detector = cfg.detector;
    s.temperature = cfg.embedding.temperature;
    s.top_k = cfg.top_k;
    s.concept_count = space.size();
    s.concept_fingerprint = space.fingerprint();
    s.explained_variance = proj.explained_variance;
    s.categories = category_stats(assignment);
    s.d_anchor = div.d_anchor;
    s.pairwise_diversity = div.pairwise_diversity;

    const std::size_t n_neurons = activations.cols();
    s.neurons.resize(n_neurons);
    parallel_for(n_neurons, 8, [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const auto& a = assignment.neurons[n];
            NeuronRecord& r = s.neurons[n];
            r.index = n;
            r.concept_index = a.concept_index;
            r.concept_word = space.concepts[a.concept_index].word;
            r.category = a.category;
            r.similarity = a.similarity;
            r.interpretable = a.interpretable;
            r.coords = {proj.coordinates(n, 0), proj.coordinates(n, 1)};
            r.top_images = top_activating(activations, n, cfg.top_k);
            if (!meta.probe_images.empty())
                for (std::size_t k : r.top_images) r.top_image_ids.push_back(meta.probe_images[k]);
        }
    });
    for (std::size_t a = 0; a < anchors.size(); ++a)
        s.anchors.push_back({anchors.words[a],
                             {proj.coordinates(n_neurons + a, 0), proj.coordinates(n_neurons + a, 1)},
                             div.per_anchor[a].neuron,
                             div.per_anchor[a].distance});
    return s;
}

Snapshot build_snapshot(const store::Run& run, const std::string& layer, std::int64_t epoch, const AnalysisConfig& cfg,
                        const store::AnchorSet& anchors) {
    const MatrixD q = run.load_activations(layer, epoch);
    return make_snapshot(q, run.space, anchors, cfg, {run.manifest.run_id, layer, epoch, run.manifest.probe_images});
}

// ---------------------------------------------------------------------------

std::optional<std::int64_t> settle_epoch(const Trajectory& trajectory, double delta) {
    if (!(delta > 0.0)) throw InputError("settle delta must be > 0");
    const auto& pts = trajectory.points;
    if (pts.size() < 2) return std::nullopt;
    const auto& last = pts.back().embedding;
    std::size_t first_ok = pts.size() - 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        double sq = 0.0;
        for (std::size_t k = 0; k < last.size(); ++k) {
            const double d = pts[i].embedding[k] - last[k];
            sq += d * d;
        }
        if (std::sqrt(sq) > delta) break;
        first_ok = i;
    }
    if (first_ok == pts.size() - 1) return std::nullopt;
    return pts[first_ok].epoch;
}

TrackResult track_neurons(const store::Run& run, const std::string& layer, std::span<const std::size_t> neurons,
                          const AnalysisConfig& cfg, const store::AnchorSet& anchors, double settle_delta) {
    const store::LayerSpec* spec = run.manifest.find_layer(layer);
    if (!spec) throw InputError("layer not found: " + layer);
    for (std::size_t n : neurons)
        if (n >= spec->neurons)
            throw InputError("invalid neuron index " + std::to_string(n) + " for layer " + layer + " with " +
                             std::to_string(spec->neurons) + " neurons");
    if (anchors.dim() != run.space.dim()) throw InputError("embedding dimension mismatch between concepts and anchors");

    struct Checkpoint {
        std::int64_t epoch;
        detect::ConceptAssignment assignment;
        embed::NeuronEmbeddingSet embeddings;
    };
    std::vector<Checkpoint> checkpoints;
    MatrixD all_points;
    for (const auto& ck : spec->checkpoints) {
        const MatrixD q = run.load_activations(layer, ck.epoch);
        const auto sims = detect::compute_similarity(q, run.space, cfg.detector);
        auto assignment = detect::assign_concepts(sims, run.space, cfg.detector);
        auto emb = embed::neuron_embeddings(sims.values, run.space, cfg.embedding);
        all_points = embed::stack_rows(all_points, emb.embeddings);
        checkpoints.push_back({ck.epoch, std::move(assignment), std::move(emb)});
    }
    all_points = embed::stack_rows(all_points, anchors.embeddings);

    TrackResult out;
    out.run_id = run.manifest.run_id;
    out.layer = layer;
    out.settle_delta = settle_delta;
    out.anchor_words = anchors.words;
    out.basis = embed::project_2d(all_points);
    out.anchor_coords = out.basis.project(anchors.embeddings);
    out.basis.coordinates = MatrixD();  // the per-checkpoint projections below are authoritative

    std::vector<MatrixD> coords;
    coords.reserve(checkpoints.size());
    for (const auto& ck : checkpoints) coords.push_back(out.basis.project(ck.embeddings.embeddings));

    for (std::size_t n : neurons) {
        Trajectory t;
        t.neuron = n;
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
            const auto& ck = checkpoints[c];
            TrajectoryPoint p;
            p.epoch = ck.epoch;
            p.concept_index = ck.assignment.neurons[n].concept_index;
            p.concept_word = run.space.concepts[p.concept_index].word;
            p.similarity = ck.assignment.neurons[n].similarity;
            p.coords = {coords[c](n, 0), coords[c](n, 1)};
            auto u = ck.embeddings.embeddings.row(n);
            p.embedding.assign(u.begin(), u.end());
            for (std::size_t a = 0; a < anchors.size(); ++a) {
                double sq = 0.0;
                for (std::size_t k = 0; k < u.size(); ++k) {
                    const double d = u[k] - anchors.embeddings(a, k);
                    sq += d * d;
                }
                p.anchor_distances.push_back(std::sqrt(sq));
            }
            t.points.push_back(std::move(p));
        }
        t.settle_epoch = settle_epoch(t, settle_delta);
        out.trajectories.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------

RunComparison compare_runs(const Snapshot& a, const Snapshot& b) {
    if (a.concept_count != b.concept_count || a.concept_fingerprint != b.concept_fingerprint)
        throw InputError("mismatched concept spaces: cannot compare " + snapshot_label(a) + " with " +
                         snapshot_label(b));
    RunComparison out;
    out.label_a = snapshot_label(a);
    out.label_b = snapshot_label(b);
    for (std::size_t c = 0; c < store::kCategoryCount; ++c) {
        const auto& ca = a.categories.per_category[c];
        const auto& cb = b.categories.per_category[c];
        out.categories.push_back({ca.category, ca.count, cb.count,
                                  static_cast<std::int64_t>(ca.count) - static_cast<std::int64_t>(cb.count)});
    }
    std::map<std::size_t, ConceptCount> table;
    auto tally = [&table](const Snapshot& s, bool first) {
        for (const auto& n : s.neurons) {
            if (!n.interpretable) continue;
            auto& row = table[n.concept_index];
            row.concept_index = n.concept_index;
            row.word = n.concept_word;
            ++(first ? row.count_a : row.count_b);
        }
    };
    tally(a, true);
    tally(b, false);
    for (auto& [idx, row] : table) {
        row.delta = static_cast<std::int64_t>(row.count_a) - static_cast<std::int64_t>(row.count_b);
        out.concepts.push_back(row);
    }
    out.interpretable_delta = static_cast<std::int64_t>(a.categories.interpretable) -
                              static_cast<std::int64_t>(b.categories.interpretable);
    out.d_anchor_a = a.d_anchor;
    out.d_anchor_b = b.d_anchor;
    out.d_anchor_delta = a.d_anchor - b.d_anchor;
    return out;
}

}  // namespace concept_monitor::telemetry
