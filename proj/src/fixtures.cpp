#include "concept_monitor/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/manifest.hpp"
#include "concept_monitor/tensor_store.hpp"

namespace fs = std::filesystem;

namespace concept_monitor::fixtures {
namespace {

struct Word {
    const char* word;
    store::Category category;
};

using store::Category;
constexpr Word kVocabulary[] = {
    {"zigzagged", Category::Texture}, {"plane", Category::Object},   {"stairs", Category::Scene},
    {"red", Category::Color},         {"wood", Category::Material},  {"wheel", Category::Part},
    {"striped", Category::Texture},   {"dog", Category::Object},     {"kitchen", Category::Scene},
    {"blue", Category::Color},        {"metal", Category::Material}, {"window", Category::Part},
    {"dotted", Category::Texture},    {"car", Category::Object},     {"street", Category::Scene},
    {"green", Category::Color},       {"glass", Category::Material}, {"leg", Category::Part},
    {"honeycombed", Category::Texture}, {"chair", Category::Object}, {"bedroom", Category::Scene},
    {"yellow", Category::Color},      {"fabric", Category::Material}, {"sky", Category::Other},
};
constexpr std::size_t kVocabularySize = std::size(kVocabulary);

std::vector<store::ConceptEntry> make_concepts(std::size_t n) {
    std::vector<store::ConceptEntry> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < kVocabularySize) {
            out.push_back({kVocabulary[i].word, kVocabulary[i].category});
        } else {
            out.push_back({"concept_" + std::to_string(i), store::kAllCategories[i % store::kCategoryCount]});
        }
    }
    return out;
}

}  // namespace

double uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double gaussian(Rng& rng) {
    const double u1 = 1.0 - uniform(rng);  // (0, 1]
    const double u2 = uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

MatrixD gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    MatrixD m(rows, cols);
    for (double& v : m.data()) v = gaussian(rng);
    return m;
}

MatrixD uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    MatrixD m(rows, cols);
    for (double& v : m.data()) v = lo + (hi - lo) * uniform(rng);
    return m;
}

MatrixD unit_rows(MatrixD m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        double sq = 0.0;
        for (double v : row) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm > 0.0)
            for (double& v : row) v /= norm;
    }
    return m;
}

RunSpec reference_spec() { return RunSpec{}; }

fs::path write_synthetic_run(const RunSpec& spec, const fs::path& dir) {
    if (spec.probes < 2 || spec.concepts == 0 || spec.dim < 2 || spec.layers.empty() || spec.epochs.empty())
        throw InputError("synthetic run spec out of range");
    fs::create_directories(dir);
    Rng rng(spec.seed);

    const auto concepts = make_concepts(spec.concepts);
    // Embeddings are stored as float32; normalize after rounding so rows stay unit-norm.
    MatrixF emb = matrix_cast<float>(unit_rows(gaussian_matrix(rng, spec.concepts, spec.dim)));
    emb = matrix_cast<float>(unit_rows(matrix_cast<double>(emb)));

    // CLIP-like probe/concept similarities around 0.2.
    MatrixD sims(spec.probes, spec.concepts);
    for (double& v : sims.data()) v = 0.2 + 0.05 * gaussian(rng);

    store::RunManifest m;
    m.run_id = spec.run_id;
    m.probe_count = spec.probes;
    m.base_dir = dir;
    store::write_concept_tsv(concepts, dir / "concepts.tsv");
    store::write_matrix(emb, dir / "concepts.cmtx");
    m.concepts = {"concepts.tsv", "concepts.cmtx"};
    store::write_matrix(matrix_cast<float>(sims), dir / "probe_sims.cmtx");
    m.probe_sims = "probe_sims.cmtx";

    if (spec.probe_labels) {
        // Label the top decile of probes for each concept.
        MatrixF labels(spec.probes, spec.concepts);
        const std::size_t top = std::max<std::size_t>(1, spec.probes / 10);
        std::vector<double> column(spec.probes);
        for (std::size_t i = 0; i < spec.concepts; ++i) {
            for (std::size_t k = 0; k < spec.probes; ++k) column[k] = sims(k, i);
            std::vector<double> sorted = column;
            std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top - 1), sorted.end(),
                             std::greater<>());
            for (std::size_t k = 0; k < spec.probes; ++k) labels(k, i) = column[k] >= sorted[top - 1] ? 1.0f : 0.0f;
        }
        store::write_matrix(labels, dir / "probe_labels.cmtx");
        m.probe_labels = "probe_labels.cmtx";
    }

    if (spec.anchors > 0) {
        // Prefer one anchor per category, in vocabulary order.
        std::vector<std::size_t> picked;
        std::vector<bool> used_category(store::kCategoryCount, false);
        for (std::size_t i = 0; i < spec.concepts && picked.size() < spec.anchors; ++i) {
            const auto c = static_cast<std::size_t>(concepts[i].category);
            if (!used_category[c]) {
                used_category[c] = true;
                picked.push_back(i);
            }
        }
        for (std::size_t i = 0; i < spec.concepts && picked.size() < spec.anchors; ++i)
            if (std::find(picked.begin(), picked.end(), i) == picked.end()) picked.push_back(i);
        std::vector<std::string> words;
        MatrixF anchor_emb(picked.size(), spec.dim);
        for (std::size_t a = 0; a < picked.size(); ++a) {
            words.push_back(concepts[picked[a]].word);
            std::copy(emb.row(picked[a]).begin(), emb.row(picked[a]).end(), anchor_emb.row(a).begin());
        }
        store::write_anchor_tsv(words, dir / "anchors.tsv");
        store::write_matrix(anchor_emb, dir / "anchors.cmtx");
        m.anchors = store::FileGroup{"anchors.tsv", "anchors.cmtx"};
    }

    if (spec.probe_images)
        for (std::size_t k = 0; k < spec.probes; ++k) m.probe_images.push_back("probe_" + std::to_string(k) + ".jpg");

    // Each neuron drifts from the first concept (a texture) toward its own target
    // concept as epochs advance; a fraction of neurons stays weakly tuned.
    const std::int64_t last_epoch = spec.epochs.back();
    for (const auto& [name, neurons] : spec.layers) {
        store::LayerSpec layer{name, neurons, {}};
        std::vector<std::size_t> target(neurons);
        std::vector<double> gain(neurons);
        for (std::size_t n = 0; n < neurons; ++n) {
            target[n] = static_cast<std::size_t>(rng() % spec.concepts);
            gain[n] = 0.5 + uniform(rng);
        }
        const MatrixD base_noise = gaussian_matrix(rng, spec.probes, neurons);
        for (std::int64_t epoch : spec.epochs) {
            const double progress =
                last_epoch > spec.epochs.front()
                    ? static_cast<double>(epoch - spec.epochs.front()) / static_cast<double>(last_epoch - spec.epochs.front())
                    : 1.0;
            MatrixF q(spec.probes, neurons);
            for (std::size_t k = 0; k < spec.probes; ++k)
                for (std::size_t n = 0; n < neurons; ++n) {
                    const double texture = sims(k, 0) - 0.2;
                    const double own = sims(k, target[n]) - 0.2;
                    const double signal = (1.0 - progress) * texture + progress * own;
                    const double noise = 0.6 * base_noise(k, n) + 0.4 * gaussian(rng);
                    q(k, n) = static_cast<float>(std::max(0.0, gain[n] * (20.0 * signal + 0.35 * noise) + 0.5));
                }
            const std::string file = name + "_e" + std::to_string(epoch) + ".cmtx";
            store::write_matrix(q, dir / file);
            layer.checkpoints.push_back({epoch, file});
        }
        m.layers.push_back(std::move(layer));
    }
    store::write_manifest(m, dir / "manifest.json");
    return dir / "manifest.json";
}

}  // namespace concept_monitor::fixtures
