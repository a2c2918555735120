#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "concept_monitor/fixtures.hpp"
#include "concept_monitor/manifest.hpp"
#include "concept_monitor/matrix.hpp"

namespace testing_support {

using concept_monitor::MatrixD;

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

MatrixD random_matrix(concept_monitor::fixtures::Rng& rng, std::size_t rows, std::size_t cols);
concept_monitor::store::ConceptSpace random_space(concept_monitor::fixtures::Rng& rng, std::size_t concepts,
                                                  std::size_t dim, std::size_t probes);

struct LayerData {
    std::string name;
    std::vector<std::pair<std::int64_t, MatrixD>> checkpoints;
};

/// Writes a run from in-memory pieces; returns the manifest path.
std::filesystem::path write_run(const std::filesystem::path& dir, const concept_monitor::store::ConceptSpace& space,
                                const std::vector<LayerData>& layers,
                                const concept_monitor::store::AnchorSet* anchors = nullptr);

std::string read_file(const std::filesystem::path& p);

}  // namespace testing_support
