#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "concept_monitor/tensor_store.hpp"

namespace concept_monitor::store {

struct CheckpointRef {
    std::int64_t epoch = 0;
    std::filesystem::path activations;  // as written in the manifest
};

struct LayerSpec {
    std::string name;
    std::uint64_t neurons = 0;
    std::vector<CheckpointRef> checkpoints;
};

struct FileGroup {
    std::filesystem::path words;
    std::filesystem::path embeddings;
};

/// In-memory form of the run manifest JSON (schema in docs/formats.md).
/// Relative paths resolve against `base_dir`, the manifest's directory.
struct RunManifest {
    std::string run_id;
    std::uint64_t probe_count = 0;
    FileGroup concepts;
    std::optional<std::filesystem::path> probe_sims;
    std::optional<std::filesystem::path> probe_labels;
    std::optional<FileGroup> anchors;
    std::vector<std::string> probe_images;
    std::optional<std::string> encoder;
    std::vector<LayerSpec> layers;
    std::filesystem::path base_dir;

    [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const;
    [[nodiscard]] const LayerSpec* find_layer(const std::string& name) const;
    [[nodiscard]] const CheckpointRef* find_checkpoint(const std::string& layer, std::int64_t epoch) const;
};

/// Throws InputError with line/column or field-path context.
RunManifest parse_manifest(const std::filesystem::path& path);
RunManifest parse_manifest_text(const std::string& text, const std::filesystem::path& base_dir);
std::string manifest_to_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    [[nodiscard]] bool passed() const noexcept;
    [[nodiscard]] std::vector<const ValidationCheck*> failures() const;
};

/// Runs every file-level and cross-file dimension check; throws only if the
/// manifest itself cannot be parsed.
ValidationReport validate_run(const std::filesystem::path& manifest_path);
ValidationReport validate_run(const RunManifest& manifest);

/// A validated run with its concept space (and manifest anchors, if any) loaded.
struct Run {
    RunManifest manifest;
    ConceptSpace space;
    std::optional<AnchorSet> anchors;

    /// N_probe x N_neurons activations; throws InputError "checkpoint not found: layer@epoch".
    [[nodiscard]] MatrixD load_activations(const std::string& layer, std::int64_t epoch) const;
};

/// Validates then loads. Throws InputError listing failed checks.
Run open_run(const std::filesystem::path& manifest_path);

}  // namespace concept_monitor::store
