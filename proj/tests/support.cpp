#include "support.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "concept_monitor/tensor_store.hpp"

namespace testing_support {

namespace fs = std::filesystem;
namespace cm = concept_monitor;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("cm_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

MatrixD random_matrix(cm::fixtures::Rng& rng, std::size_t rows, std::size_t cols) {
    return cm::fixtures::gaussian_matrix(rng, rows, cols);
}

cm::store::ConceptSpace random_space(cm::fixtures::Rng& rng, std::size_t concepts, std::size_t dim,
                                     std::size_t probes) {
    std::vector<cm::store::ConceptEntry> entries;
    for (std::size_t i = 0; i < concepts; ++i)
        entries.push_back({"c" + std::to_string(i), cm::store::kAllCategories[i % cm::store::kCategoryCount]});
    MatrixD labels(probes, concepts);
    MatrixD sims = cm::fixtures::uniform_matrix(rng, probes, concepts, -0.1, 0.4);
    for (std::size_t k = 0; k < probes; ++k)
        for (std::size_t i = 0; i < concepts; ++i) labels(k, i) = cm::fixtures::uniform(rng) < 0.3 ? 1.0 : 0.0;
    return cm::store::make_concept_space(std::move(entries),
                                         cm::fixtures::unit_rows(cm::fixtures::gaussian_matrix(rng, concepts, dim)),
                                         std::move(sims), std::move(labels));
}

fs::path write_run(const fs::path& dir, const cm::store::ConceptSpace& space, const std::vector<LayerData>& layers,
                   const cm::store::AnchorSet* anchors) {
    fs::create_directories(dir);
    cm::store::RunManifest m;
    m.run_id = "test";
    m.base_dir = dir;
    m.concepts = {"concepts.tsv", "concepts.cmtx"};
    cm::store::write_concept_tsv(space.concepts, dir / "concepts.tsv");
    cm::store::write_matrix(cm::matrix_cast<float>(space.embeddings), dir / "concepts.cmtx");
    if (space.probe_sims) {
        m.probe_count = space.probe_sims->rows();
        m.probe_sims = "probe_sims.cmtx";
        cm::store::write_matrix(cm::matrix_cast<float>(*space.probe_sims), dir / "probe_sims.cmtx");
    }
    if (space.probe_labels) {
        m.probe_count = space.probe_labels->rows();
        m.probe_labels = "probe_labels.cmtx";
        cm::store::write_matrix(cm::matrix_cast<float>(*space.probe_labels), dir / "probe_labels.cmtx");
    }
    if (anchors) {
        m.anchors = cm::store::FileGroup{"anchors.tsv", "anchors.cmtx"};
        cm::store::write_anchor_tsv(anchors->words, dir / "anchors.tsv");
        cm::store::write_matrix(cm::matrix_cast<float>(anchors->embeddings), dir / "anchors.cmtx");
    }
    for (const auto& l : layers) {
        cm::store::LayerSpec spec;
        spec.name = l.name;
        for (const auto& [epoch, q] : l.checkpoints) {
            spec.neurons = q.cols();
            const std::string file = l.name + "_e" + std::to_string(epoch) + ".cmtx";
            cm::store::write_matrix(cm::matrix_cast<float>(q), dir / file);
            spec.checkpoints.push_back({epoch, file});
        }
        m.layers.push_back(spec);
    }
    cm::store::write_manifest(m, dir / "manifest.json");
    return dir / "manifest.json";
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace testing_support
