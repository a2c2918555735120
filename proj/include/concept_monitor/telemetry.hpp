#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "concept_monitor/detectors.hpp"
#include "concept_monitor/diversity.hpp"
#include "concept_monitor/embedding.hpp"
#include "concept_monitor/manifest.hpp"

namespace concept_monitor::telemetry {

struct AnalysisConfig {
    detect::DetectorConfig detector = detect::DetectorConfig::defaults(detect::DetectorKind::Cos3);
    embed::EmbeddingConfig embedding;
    std::size_t top_k = 5;  // top activating probes per neuron
};

struct NeuronRecord {
    std::size_t index = 0;
    std::size_t concept_index = 0;
    std::string concept_word;
    store::Category category = store::Category::Other;
    double similarity = 0.0;
    bool interpretable = false;
    std::array<double, 2> coords{};
    std::vector<std::size_t> top_images;      // probe indices, highest activation first
    std::vector<std::string> top_image_ids;   // parallel to top_images when the manifest lists probe images
};

struct AnchorRecord {
    std::string word;
    std::array<double, 2> coords{};
    std::size_t nearest_neuron = 0;
    double distance = 0.0;
};

struct CategoryStat {
    store::Category category = store::Category::Other;
    std::size_t count = 0;
    double percentage = 0.0;  // of all neurons in the layer
};

struct CategoryStats {
    std::array<CategoryStat, store::kCategoryCount> per_category{};
    std::size_t interpretable = 0;
    std::size_t total = 0;
    double interpretable_percentage = 0.0;
};

struct Snapshot {
    std::string run_id;
    std::string layer;
    std::int64_t epoch = 0;
    detect::DetectorConfig detector;
    double temperature = 0.01;
    std::size_t top_k = 5;
    std::size_t concept_count = 0;
    std::uint64_t concept_fingerprint = 0;
    std::vector<NeuronRecord> neurons;
    std::vector<AnchorRecord> anchors;
    std::array<double, 2> explained_variance{};
    CategoryStats categories;
    double d_anchor = 0.0;
    double pairwise_diversity = 0.0;
};

/// Counts interpretable neurons per category; percentages use all neurons as denominator.
[[nodiscard]] CategoryStats category_stats(const detect::ConceptAssignment& assignment);

/// Indices of the k largest entries of column `neuron`, descending, lowest index on ties.
[[nodiscard]] std::vector<std::size_t> top_activating(const MatrixD& activations, std::size_t neuron, std::size_t k);

struct SnapshotMeta {
    std::string run_id;
    std::string layer;
    std::int64_t epoch = 0;
    std::vector<std::string> probe_images;
};

/// Detector -> assignment -> embeddings -> diversity -> projection (fitted on the
/// neuron embeddings followed by the anchor embeddings).
[[nodiscard]] Snapshot make_snapshot(const MatrixD& activations, const store::ConceptSpace& space,
                                     const store::AnchorSet& anchors, const AnalysisConfig& cfg,
                                     const SnapshotMeta& meta);

[[nodiscard]] Snapshot build_snapshot(const store::Run& run, const std::string& layer, std::int64_t epoch,
                                      const AnalysisConfig& cfg, const store::AnchorSet& anchors);

// ---------------------------------------------------------------------------

struct TrajectoryPoint {
    std::int64_t epoch = 0;
    std::size_t concept_index = 0;
    std::string concept_word;
    double similarity = 0.0;
    std::array<double, 2> coords{};
    std::vector<double> anchor_distances;  // one per tracked anchor
    std::vector<double> embedding;         // u_n at this checkpoint
};

struct Trajectory {
    std::size_t neuron = 0;
    std::vector<TrajectoryPoint> points;
    std::optional<std::int64_t> settle_epoch;
};

struct TrackResult {
    std::string run_id;
    std::string layer;
    double settle_delta = 0.1;
    std::vector<std::string> anchor_words;
    MatrixD anchor_coords;  // |A| x 2, in the shared basis
    embed::Projection2D basis;
    std::vector<Trajectory> trajectories;
};

/// Earliest epoch from which every remaining point stays within delta of the final
/// point; nullopt if only the final point qualifies.
[[nodiscard]] std::optional<std::int64_t> settle_epoch(const Trajectory& trajectory, double delta);

/// One projection basis fitted on every checkpoint's neuron embeddings (checkpoint
/// order) followed by the anchors; each checkpoint is then re-projected through it.
[[nodiscard]] TrackResult track_neurons(const store::Run& run, const std::string& layer,
                                        std::span<const std::size_t> neurons, const AnalysisConfig& cfg,
                                        const store::AnchorSet& anchors, double settle_delta = 0.1);

// ---------------------------------------------------------------------------

struct ConceptCount {
    std::size_t concept_index = 0;
    std::string word;
    std::size_t count_a = 0;
    std::size_t count_b = 0;
    std::int64_t delta = 0;  // a - b
};

struct CategoryDelta {
    store::Category category = store::Category::Other;
    std::size_t count_a = 0;
    std::size_t count_b = 0;
    std::int64_t delta = 0;
};

struct RunComparison {
    std::string label_a;
    std::string label_b;
    std::vector<CategoryDelta> categories;  // all categories, fixed order
    std::vector<ConceptCount> concepts;     // concepts held by an interpretable neuron in either run
    std::int64_t interpretable_delta = 0;
    double d_anchor_a = 0.0;
    double d_anchor_b = 0.0;
    double d_anchor_delta = 0.0;  // a - b
};

[[nodiscard]] RunComparison compare_runs(const Snapshot& a, const Snapshot& b);

}  // namespace concept_monitor::telemetry
