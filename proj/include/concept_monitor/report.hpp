#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "concept_monitor/diversity.hpp"
#include "concept_monitor/sandbox.hpp"
#include "concept_monitor/telemetry.hpp"

namespace concept_monitor::report {

using Json = nlohmann::json;

/// %.9g, with -0 written as 0. Throws ComputeError for NaN/inf.
[[nodiscard]] std::string format_number(double v);

/// Sorted keys, two-space indent, scalar arrays on one line, floats via format_number.
/// Ends with a newline.
[[nodiscard]] std::string canonical_dump(const Json& j);

// ---- snapshot.json --------------------------------------------------------

inline constexpr const char* kSnapshotFormat = "concept-monitor/snapshot/1";

[[nodiscard]] Json snapshot_to_json(const telemetry::Snapshot& s);
/// Throws InputError naming the missing/ill-typed field.
[[nodiscard]] telemetry::Snapshot snapshot_from_json(const Json& j);

std::size_t emit_snapshot_json(const telemetry::Snapshot& s, const std::filesystem::path& path);
[[nodiscard]] telemetry::Snapshot read_snapshot_json(const std::filesystem::path& path);

// ---- other JSON reports ---------------------------------------------------

[[nodiscard]] Json trajectory_to_json(const telemetry::TrackResult& t);
[[nodiscard]] Json comparison_to_json(const telemetry::RunComparison& c);

// ---- CSV -------------------------------------------------------------------

[[nodiscard]] std::string categories_csv(const telemetry::CategoryStats& stats);
[[nodiscard]] std::string sweep_csv(std::span<const diversity::SweepPoint> points);

struct ThresholdPoint {
    double tau = 0.0;
    std::size_t interpretable = 0;
    double interpretable_percentage = 0.0;
};
[[nodiscard]] std::string threshold_csv(std::span<const ThresholdPoint> points);

[[nodiscard]] std::string trace_csv(std::span<const sandbox::TraceRow> rows);

struct EpochDiversity {
    std::int64_t epoch = 0;
    double d_anchor = 0.0;
    double pairwise_diversity = 0.0;
    std::size_t interpretable = 0;
};
[[nodiscard]] std::string diversity_csv(std::span<const EpochDiversity> rows);

// ---- SVG -------------------------------------------------------------------

/// Neurons as gray circles (class "neuron"), highlighted neurons colored,
/// anchors as labelled stars (class "anchor").
[[nodiscard]] std::string embedding_svg(const telemetry::Snapshot& s, std::span<const std::size_t> highlighted = {});
/// Percentage of the layer per category.
[[nodiscard]] std::string category_bars_svg(const telemetry::CategoryStats& stats, const std::string& title);
/// Anchors plus one polyline per tracked neuron in the shared basis.
[[nodiscard]] std::string trajectory_svg(const telemetry::TrackResult& t);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};
struct CurveOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
};
[[nodiscard]] std::string curve_svg(std::span<const Series> series, const CurveOptions& options);

}  // namespace concept_monitor::report
