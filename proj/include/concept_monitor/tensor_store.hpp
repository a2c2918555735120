#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "concept_monitor/matrix.hpp"

namespace concept_monitor::store {

// MatrixFile layout, all little-endian:
//   0  magic "CMTX"      4 bytes
//   4  version = 1       u32
//   8  dtype = 1 (f32)   u8
//   9  reserved, zero    3 bytes
//  12  rows              u64
//  20  cols              u64
//  28  payload           rows*cols f32, row-major
inline constexpr std::size_t kHeaderBytes = 28;
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;

struct MatrixShape {
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    friend bool operator==(const MatrixShape&, const MatrixShape&) = default;
};

/// Writes atomically (temp file + rename). Rejects non-finite entries before touching disk.
std::size_t write_matrix(const MatrixF& m, const std::filesystem::path& path);

[[nodiscard]] MatrixF load_matrix(const std::filesystem::path& path);

/// Header and length checks only; the payload is not read.
[[nodiscard]] MatrixShape read_shape(const std::filesystem::path& path);

/// Validates a whole MatrixFile while streaming its payload in chunks; `visit` (optional)
/// sees each chunk together with the flat element index of its first value.
using ChunkVisitor = std::function<void(std::size_t first_index, std::span<const float> values)>;
MatrixShape inspect_matrix(const std::filesystem::path& path, const ChunkVisitor& visit = {});

// ---------------------------------------------------------------------------
// Concept and anchor vocabularies

enum class Category { Material, Object, Scene, Texture, Color, Part, Other };

inline constexpr std::size_t kCategoryCount = 7;
inline constexpr Category kAllCategories[kCategoryCount] = {
    Category::Material, Category::Object, Category::Scene, Category::Texture,
    Category::Color,    Category::Part,   Category::Other};

[[nodiscard]] std::string_view category_name(Category c) noexcept;
[[nodiscard]] std::optional<Category> parse_category(std::string_view name) noexcept;

struct ConceptEntry {
    std::string word;
    Category category = Category::Other;
    friend bool operator==(const ConceptEntry&, const ConceptEntry&) = default;
};

/// Concept words with categories, unit-norm text embeddings (|S| x d), and the
/// probe-side inputs consumed by the detectors.
struct ConceptSpace {
    std::vector<ConceptEntry> concepts;
    MatrixD embeddings;
    std::optional<MatrixD> probe_sims;    // N_probe x |S|, cos3 and soft-WPMI
    std::optional<MatrixD> probe_labels;  // N_probe x |S| binary, IoU

    [[nodiscard]] std::size_t size() const noexcept { return concepts.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return embeddings.cols(); }
    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view word) const;
    /// FNV-1a over the ordered word list; identifies a vocabulary across reports.
    [[nodiscard]] std::uint64_t fingerprint() const noexcept;
};

struct AnchorSet {
    std::vector<std::string> words;
    MatrixD embeddings;

    [[nodiscard]] std::size_t size() const noexcept { return words.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return embeddings.cols(); }
};

inline constexpr double kUnitNormTolerance = 1e-5;

/// Checks every ConceptSpace invariant; throws InputError naming the first violation.
ConceptSpace make_concept_space(std::vector<ConceptEntry> concepts, MatrixD embeddings,
                                std::optional<MatrixD> probe_sims = std::nullopt,
                                std::optional<MatrixD> probe_labels = std::nullopt);
AnchorSet make_anchor_set(std::vector<std::string> words, MatrixD embeddings);

/// Anchors equal to the concept vocabulary.
[[nodiscard]] AnchorSet anchors_from_concepts(const ConceptSpace& space);

/// "word<TAB>category" per line, UTF-8.
std::vector<ConceptEntry> read_concept_tsv(const std::filesystem::path& path);
void write_concept_tsv(const std::vector<ConceptEntry>& concepts, const std::filesystem::path& path);
/// One word per line; a second tab-separated column is permitted and ignored.
std::vector<std::string> read_anchor_tsv(const std::filesystem::path& path);
void write_anchor_tsv(const std::vector<std::string>& words, const std::filesystem::path& path);

/// `words.tsv` -> `words.cmtx`
[[nodiscard]] std::filesystem::path sibling_matrix_path(const std::filesystem::path& tsv);

/// Anchor TSV plus its sibling embedding MatrixFile.
AnchorSet load_anchor_set(const std::filesystem::path& tsv);

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace concept_monitor::store
