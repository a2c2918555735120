#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "concept_monitor/matrix.hpp"

// Seeded synthetic data. Values depend only on the seed (mt19937_64 is fully
// specified; the distribution transforms here are too), so fixtures are identical
// across standard libraries.
namespace concept_monitor::fixtures {

using Rng = std::mt19937_64;

/// Uniform in [0, 1) with 53 random bits.
[[nodiscard]] double uniform(Rng& rng);
/// Standard normal via Box-Muller.
[[nodiscard]] double gaussian(Rng& rng);
[[nodiscard]] MatrixD gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols);
[[nodiscard]] MatrixD uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);
[[nodiscard]] MatrixD unit_rows(MatrixD m);

struct RunSpec {
    std::string run_id = "reference";
    std::size_t probes = 120;
    std::size_t concepts = 24;
    std::size_t dim = 16;
    std::vector<std::pair<std::string, std::size_t>> layers = {{"layer3", 12}, {"layer4", 16}};
    std::vector<std::int64_t> epochs = {0, 5, 10};
    std::size_t anchors = 6;  // first concepts of distinct categories; 0 = no anchor file
    bool probe_labels = true;
    bool probe_images = true;
    std::uint64_t seed = 2023;
};

/// Writes concept/anchor TSVs, MatrixFiles and manifest.json into `dir`; returns the
/// manifest path. Early checkpoints cluster on one texture concept; later ones spread
/// across distinct concepts.
std::filesystem::path write_synthetic_run(const RunSpec& spec, const std::filesystem::path& dir);

/// The small run used by golden files and determinism checks.
[[nodiscard]] RunSpec reference_spec();

}  // namespace concept_monitor::fixtures
