#include "concept_monitor/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "concept_monitor/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace concept_monitor::store {
namespace {

std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw InputError("manifest field " + field + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& ctx) {
    if (!obj.is_object()) field_error(ctx, "expected object");
    auto it = obj.find(key);
    if (it == obj.end()) field_error(ctx.empty() ? key : ctx + "." + key, "missing");
    return *it;
}

std::string get_string(const json& obj, const std::string& key, const std::string& ctx) {
    const json& v = require(obj, key, ctx);
    if (!v.is_string() || v.get_ref<const std::string&>().empty())
        field_error(ctx.empty() ? key : ctx + "." + key, "expected non-empty string");
    return v.get<std::string>();
}

std::uint64_t get_count(const json& obj, const std::string& key, const std::string& ctx) {
    const json& v = require(obj, key, ctx);
    if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
        field_error(ctx.empty() ? key : ctx + "." + key, "expected positive integer");
    return v.get<std::uint64_t>();
}

std::optional<fs::path> opt_path(const json& obj, const std::string& key, const std::string& ctx) {
    if (!obj.contains(key)) return std::nullopt;
    return fs::path(get_string(obj, key, ctx));
}

FileGroup get_group(const json& obj, const std::string& ctx) {
    return FileGroup{get_string(obj, "words", ctx), get_string(obj, "embeddings", ctx)};
}

}  // namespace

fs::path RunManifest::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

const LayerSpec* RunManifest::find_layer(const std::string& name) const {
    for (const auto& l : layers)
        if (l.name == name) return &l;
    return nullptr;
}

const CheckpointRef* RunManifest::find_checkpoint(const std::string& layer, std::int64_t epoch) const {
    const LayerSpec* l = find_layer(layer);
    if (!l) return nullptr;
    for (const auto& c : l->checkpoints)
        if (c.epoch == epoch) return &c;
    return nullptr;
}

RunManifest parse_manifest_text(const std::string& text, const fs::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError("manifest is not valid JSON at " + line_col(text, e.byte == 0 ? 0 : e.byte - 1) +
                         ": " + e.what());
    }
    if (!doc.is_object()) throw InputError("manifest: top level must be a JSON object");

    RunManifest m;
    m.base_dir = base_dir;
    m.run_id = get_string(doc, "run_id", "");
    m.probe_count = get_count(doc, "probe_count", "");

    const json& concepts = require(doc, "concepts", "");
    m.concepts = get_group(concepts, "concepts");
    m.probe_sims = opt_path(concepts, "probe_sims", "concepts");
    m.probe_labels = opt_path(concepts, "probe_labels", "concepts");

    if (doc.contains("anchors")) m.anchors = get_group(doc["anchors"], "anchors");
    if (doc.contains("encoder")) m.encoder = get_string(doc, "encoder", "");
    if (doc.contains("probe_images")) {
        const json& imgs = doc["probe_images"];
        if (!imgs.is_array()) field_error("probe_images", "expected array of strings");
        for (std::size_t i = 0; i < imgs.size(); ++i) {
            if (!imgs[i].is_string()) field_error("probe_images[" + std::to_string(i) + "]", "expected string");
            m.probe_images.push_back(imgs[i].get<std::string>());
        }
    }

    const json& layers = require(doc, "layers", "");
    if (!layers.is_array() || layers.empty()) field_error("layers", "expected non-empty array");
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const std::string ctx = "layers[" + std::to_string(li) + "]";
        LayerSpec layer;
        layer.name = get_string(layers[li], "name", ctx);
        layer.neurons = get_count(layers[li], "neurons", ctx);
        const json& cks = require(layers[li], "checkpoints", ctx);
        if (!cks.is_array() || cks.empty()) field_error(ctx + ".checkpoints", "expected non-empty array");
        for (std::size_t ci = 0; ci < cks.size(); ++ci) {
            const std::string cctx = ctx + ".checkpoints[" + std::to_string(ci) + "]";
            const json& e = require(cks[ci], "epoch", cctx);
            if (!e.is_number_integer()) field_error(cctx + ".epoch", "expected integer");
            layer.checkpoints.push_back({e.get<std::int64_t>(), get_string(cks[ci], "activations", cctx)});
        }
        m.layers.push_back(std::move(layer));
    }
    return m;
}

RunManifest parse_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_manifest_text(ss.str(), path.parent_path());
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::string manifest_to_json(const RunManifest& m) {
    json doc;
    doc["run_id"] = m.run_id;
    doc["probe_count"] = m.probe_count;
    json concepts = {{"words", m.concepts.words.generic_string()},
                     {"embeddings", m.concepts.embeddings.generic_string()}};
    if (m.probe_sims) concepts["probe_sims"] = m.probe_sims->generic_string();
    if (m.probe_labels) concepts["probe_labels"] = m.probe_labels->generic_string();
    doc["concepts"] = concepts;
    if (m.anchors)
        doc["anchors"] = {{"words", m.anchors->words.generic_string()},
                          {"embeddings", m.anchors->embeddings.generic_string()}};
    if (m.encoder) doc["encoder"] = *m.encoder;
    if (!m.probe_images.empty()) doc["probe_images"] = m.probe_images;
    json layers = json::array();
    for (const auto& l : m.layers) {
        json cks = json::array();
        for (const auto& c : l.checkpoints)
            cks.push_back({{"epoch", c.epoch}, {"activations", c.activations.generic_string()}});
        layers.push_back({{"name", l.name}, {"neurons", l.neurons}, {"checkpoints", cks}});
    }
    doc["layers"] = layers;
    return doc.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const fs::path& path) { write_file_atomic(path, manifest_to_json(m)); }

// ---------------------------------------------------------------------------

bool ValidationReport::passed() const noexcept {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return !checks.empty();
}

std::vector<const ValidationCheck*> ValidationReport::failures() const {
    std::vector<const ValidationCheck*> out;
    for (const auto& c : checks)
        if (!c.passed) out.push_back(&c);
    return out;
}

namespace {

class Checker {
public:
    explicit Checker(ValidationReport& report) : report_(report) {}

    bool check(const std::string& name, bool ok, const std::string& failure) {
        report_.checks.push_back({name, ok, ok ? "ok" : failure});
        return ok;
    }

    /// Streams the file; returns its shape if the MatrixFile itself is well formed.
    std::optional<MatrixShape> matrix(const std::string& name, const fs::path& path,
                                      const ChunkVisitor& visit = {}) {
        try {
            auto shape = inspect_matrix(path, visit);
            check(name, true, "");
            return shape;
        } catch (const std::exception& e) {
            check(name, false, e.what());
            return std::nullopt;
        }
    }

private:
    ValidationReport& report_;
};

std::string shape_str(MatrixShape s) { return std::to_string(s.rows) + "x" + std::to_string(s.cols); }

struct UnitRows {
    std::optional<MatrixShape> shape;
    std::optional<std::size_t> bad_row;
};

// Streams an embedding file, tracking row norms.
UnitRows check_embedding_file(Checker& c, const std::string& name, const fs::path& path) {
    std::uint64_t cols = 0;
    try {
        cols = read_shape(path).cols;
    } catch (...) {
    }
    std::vector<double> sq;
    UnitRows out;
    out.shape = c.matrix(name, path, [&](std::size_t first, std::span<const float> v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::size_t r = (first + i) / cols;
            if (r >= sq.size()) sq.resize(r + 1, 0.0);
            sq[r] += static_cast<double>(v[i]) * v[i];
        }
    });
    for (std::size_t r = 0; r < sq.size() && !out.bad_row; ++r)
        if (std::abs(std::sqrt(sq[r]) - 1.0) > kUnitNormTolerance) out.bad_row = r;
    return out;
}

}  // namespace

ValidationReport validate_run(const RunManifest& m) {
    ValidationReport report;
    Checker c(report);
    const std::uint64_t n_probe = m.probe_count;

    // Concept vocabulary
    std::optional<std::size_t> n_concepts;
    try {
        auto entries = read_concept_tsv(m.resolve(m.concepts.words));
        std::set<std::string> uniq;
        std::string dup;
        for (const auto& e : entries)
            if (!uniq.insert(e.word).second && dup.empty()) dup = e.word;
        if (c.check("concepts.words", !entries.empty() && dup.empty(),
                    entries.empty() ? "concept list is empty" : "duplicate concept: " + dup))
            n_concepts = entries.size();
    } catch (const std::exception& e) {
        c.check("concepts.words", false, e.what());
    }

    std::optional<std::uint64_t> dim;
    if (auto emb = check_embedding_file(c, "concepts.embeddings: file", m.resolve(m.concepts.embeddings));
        emb.shape) {
        if (n_concepts)
            c.check("concepts.embeddings: rows", emb.shape->rows == *n_concepts,
                    "concept embeddings have " + std::to_string(emb.shape->rows) + " rows for " +
                        std::to_string(*n_concepts) + " concepts");
        if (c.check("concepts.embeddings: width", emb.shape->cols > 0, "zero-width embeddings"))
            dim = emb.shape->cols;
        c.check("concepts.embeddings: unit norm", !emb.bad_row,
                emb.bad_row ? "concept embedding row " + std::to_string(*emb.bad_row) + " is not unit norm" : "");
    }

    if (m.probe_sims) {
        if (auto s = c.matrix("concepts.probe_sims: file", m.resolve(*m.probe_sims))) {
            c.check("concepts.probe_sims: shape",
                    s->rows == n_probe && (!n_concepts || s->cols == *n_concepts),
                    "probe_sims is " + shape_str(*s) + ", expected " + std::to_string(n_probe) + "x" +
                        (n_concepts ? std::to_string(*n_concepts) : "|S|"));
        }
    }
    if (m.probe_labels) {
        bool binary = true;
        auto s = c.matrix("concepts.probe_labels: file", m.resolve(*m.probe_labels),
                          [&binary](std::size_t, std::span<const float> v) {
                              for (float x : v)
                                  if (x != 0.0f && x != 1.0f) binary = false;
                          });
        if (s) {
            c.check("concepts.probe_labels: shape",
                    s->rows == n_probe && (!n_concepts || s->cols == *n_concepts),
                    "probe_labels is " + shape_str(*s) + ", expected " + std::to_string(n_probe) + "x|S|");
            c.check("concepts.probe_labels: binary", binary, "probe_labels contains values other than 0/1");
        }
    }

    if (m.anchors) {
        std::optional<std::size_t> n_anchors;
        try {
            auto words = read_anchor_tsv(m.resolve(m.anchors->words));
            std::set<std::string> uniq(words.begin(), words.end());
            if (c.check("anchors.words", !words.empty() && uniq.size() == words.size(),
                        words.empty() ? "anchor list is empty" : "duplicate anchor word"))
                n_anchors = words.size();
        } catch (const std::exception& e) {
            c.check("anchors.words", false, e.what());
        }
        if (auto emb = check_embedding_file(c, "anchors.embeddings: file", m.resolve(m.anchors->embeddings));
            emb.shape) {
            if (n_anchors)
                c.check("anchors.embeddings: rows", emb.shape->rows == *n_anchors,
                        "anchor embeddings have " + std::to_string(emb.shape->rows) + " rows for " +
                            std::to_string(*n_anchors) + " anchors");
            c.check("anchors.embeddings: unit norm", !emb.bad_row,
                    emb.bad_row ? "anchor embedding row " + std::to_string(*emb.bad_row) + " is not unit norm" : "");
            if (dim)
                c.check("anchors.embeddings: dimension", emb.shape->cols == *dim,
                        "embedding dimension mismatch: concepts d=" + std::to_string(*dim) +
                            ", anchors d=" + std::to_string(emb.shape->cols));
        }
    }
    if (!m.probe_images.empty())
        c.check("probe_images: count", m.probe_images.size() == n_probe,
                std::to_string(m.probe_images.size()) + " probe image ids for probe_count " +
                    std::to_string(n_probe));

    std::set<std::string> layer_names;
    for (const auto& layer : m.layers) {
        c.check("layer " + layer.name + ": unique name", layer_names.insert(layer.name).second,
                "duplicate layer name " + layer.name);
        bool increasing = true;
        for (std::size_t i = 1; i < layer.checkpoints.size(); ++i)
            if (layer.checkpoints[i].epoch <= layer.checkpoints[i - 1].epoch) increasing = false;
        c.check("layer " + layer.name + ": epochs increasing", increasing,
                "epoch indices not strictly increasing in layer " + layer.name);
        for (const auto& ck : layer.checkpoints) {
            const std::string tag = "layer=" + layer.name + ", epoch=" + std::to_string(ck.epoch);
            if (auto s = c.matrix(tag + ": activations file", m.resolve(ck.activations))) {
                c.check(tag + ": probe count", s->rows == n_probe,
                        "probe count mismatch " + tag + ": file has " + std::to_string(s->rows) +
                            " rows, manifest probe_count=" + std::to_string(n_probe));
                c.check(tag + ": neuron count", s->cols == layer.neurons,
                        "neuron count mismatch " + tag + ": file has " + std::to_string(s->cols) +
                            " columns, manifest neurons=" + std::to_string(layer.neurons));
            }
        }
    }
    return report;
}

ValidationReport validate_run(const fs::path& manifest_path) { return validate_run(parse_manifest(manifest_path)); }

MatrixD Run::load_activations(const std::string& layer, std::int64_t epoch) const {
    const CheckpointRef* ck = manifest.find_checkpoint(layer, epoch);
    if (!ck) throw InputError("checkpoint not found: " + layer + "@" + std::to_string(epoch));
    MatrixF raw = load_matrix(manifest.resolve(ck->activations));
    const LayerSpec* spec = manifest.find_layer(layer);
    if (raw.rows() != manifest.probe_count || raw.cols() != spec->neurons)
        throw InputError("probe count mismatch layer=" + layer + ", epoch=" + std::to_string(epoch));
    return matrix_cast<double>(raw);
}

Run open_run(const fs::path& manifest_path) {
    RunManifest m = parse_manifest(manifest_path);
    const ValidationReport report = validate_run(m);
    if (!report.passed()) {
        std::string msg = "run failed validation:";
        for (const auto* f : report.failures()) msg += "\n  " + f->name + ": " + f->message;
        throw InputError(msg);
    }
    std::optional<MatrixD> sims, labels;
    if (m.probe_sims) sims = matrix_cast<double>(load_matrix(m.resolve(*m.probe_sims)));
    if (m.probe_labels) labels = matrix_cast<double>(load_matrix(m.resolve(*m.probe_labels)));
    ConceptSpace space = make_concept_space(read_concept_tsv(m.resolve(m.concepts.words)),
                                            matrix_cast<double>(load_matrix(m.resolve(m.concepts.embeddings))),
                                            std::move(sims), std::move(labels));
    std::optional<AnchorSet> anchors;
    if (m.anchors)
        anchors = make_anchor_set(read_anchor_tsv(m.resolve(m.anchors->words)),
                                  matrix_cast<double>(load_matrix(m.resolve(m.anchors->embeddings))));
    return Run{std::move(m), std::move(space), std::move(anchors)};
}

}  // namespace concept_monitor::store
