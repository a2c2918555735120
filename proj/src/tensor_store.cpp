#include "concept_monitor/tensor_store.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "concept_monitor/errors.hpp"

namespace fs = std::filesystem;

namespace concept_monitor::store {
namespace {

constexpr std::array<char, 4> kMagic = {'C', 'M', 'T', 'X'};
constexpr std::size_t kChunkFloats = 1 << 16;

void put_u32(char* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}
void put_u64(char* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}
std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}
std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::string rc(std::size_t flat, std::uint64_t cols) {
    return "(" + std::to_string(flat / cols) + "," + std::to_string(flat % cols) + ")";
}

struct Reader {
    std::ifstream in;
    fs::path path;
    std::uintmax_t file_size = 0;
    MatrixShape shape;
};

Reader open_and_read_header(const fs::path& path) {
    Reader r;
    r.path = path;
    std::error_code ec;
    r.file_size = fs::file_size(path, ec);
    if (ec) throw FormatError(FormatErrorKind::Io, 0, "cannot read " + path.string() + ": " + ec.message());
    r.in.open(path, std::ios::binary);
    if (!r.in) throw FormatError(FormatErrorKind::Io, 0, "cannot open " + path.string());

    std::array<unsigned char, kHeaderBytes> h{};
    r.in.read(reinterpret_cast<char*>(h.data()), kHeaderBytes);
    const auto got = static_cast<std::size_t>(r.in.gcount());
    if (std::memcmp(h.data(), kMagic.data(), std::min<std::size_t>(got, 4)) != 0)
        throw FormatError(FormatErrorKind::BadMagic, 0, path.string() + ": bad magic");
    if (got < 4)
        throw FormatError(FormatErrorKind::Truncated, got, path.string() + ": truncated inside magic");
    if (got < kHeaderBytes)
        throw FormatError(FormatErrorKind::Truncated, got,
                          path.string() + ": truncated: expected " + std::to_string(kHeaderBytes) +
                              " header bytes, found " + std::to_string(got));
    if (const auto v = get_u32(h.data() + 4); v != kFormatVersion)
        throw FormatError(FormatErrorKind::UnsupportedVersion, 4,
                          path.string() + ": unsupported version " + std::to_string(v) + " at offset 4");
    if (h[8] != kDtypeFloat32)
        throw FormatError(FormatErrorKind::UnsupportedDtype, 8,
                          path.string() + ": unsupported dtype " + std::to_string(h[8]) + " at offset 8");
    for (std::size_t i = 9; i < 12; ++i)
        if (h[i] != 0)
            throw FormatError(FormatErrorKind::BadReserved, i,
                              path.string() + ": nonzero reserved byte at offset " + std::to_string(i));
    r.shape.rows = get_u64(h.data() + 12);
    r.shape.cols = get_u64(h.data() + 20);

    const std::uintmax_t payload = r.file_size - kHeaderBytes;
    const long double expected = static_cast<long double>(r.shape.rows) * r.shape.cols * 4.0L;
    if (static_cast<long double>(payload) < expected) {
        std::ostringstream msg;
        msg << path.string() << ": truncated: expected " << static_cast<std::uintmax_t>(expected)
            << " bytes, found " << payload << " (payload starts at offset " << kHeaderBytes << ")";
        throw FormatError(FormatErrorKind::Truncated, kHeaderBytes + payload, msg.str());
    }
    if (static_cast<long double>(payload) > expected)
        throw FormatError(FormatErrorKind::TrailingBytes,
                          kHeaderBytes + static_cast<std::size_t>(expected),
                          path.string() + ": " + std::to_string(payload - static_cast<std::uintmax_t>(expected)) +
                              " trailing bytes after payload");
    return r;
}

// Reads `count` floats into `out`, checking finiteness; `first` is the flat index of out[0].
void read_floats(Reader& r, std::size_t first, std::span<float> out) {
    std::vector<unsigned char> buf(out.size() * 4);
    r.in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(r.in.gcount()) != buf.size())
        throw FormatError(FormatErrorKind::Io, kHeaderBytes + first * 4, r.path.string() + ": short read");
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float v = std::bit_cast<float>(get_u32(buf.data() + 4 * i));
        if (!std::isfinite(v))
            throw FormatError(FormatErrorKind::NonFinite, kHeaderBytes + (first + i) * 4,
                              r.path.string() + ": non-finite value at " + rc(first + i, r.shape.cols) +
                                  ", offset " + std::to_string(kHeaderBytes + (first + i) * 4));
        out[i] = v;
    }
}

std::vector<std::string> split_tab(const std::string& line) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        parts.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

void check_unit_rows(const MatrixD& m, const std::string& what) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double sq = 0.0;
        for (double v : m.row(r)) sq += v * v;
        const double norm = std::sqrt(sq);
        if (std::abs(norm - 1.0) > kUnitNormTolerance)
            throw InputError(what + " row " + std::to_string(r) + " has norm " + std::to_string(norm) +
                             ", expected unit norm");
    }
}

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view contents) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw InputError("write failed: " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw InputError("cannot rename into " + path.string());
    }
}

std::size_t write_matrix(const MatrixF& m, const fs::path& path) {
    const auto values = m.data();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw InputError("non-finite value at " + rc(i, m.cols()));

    std::string bytes(kHeaderBytes + 4 * values.size(), '\0');
    std::memcpy(bytes.data(), kMagic.data(), 4);
    put_u32(bytes.data() + 4, kFormatVersion);
    bytes[8] = static_cast<char>(kDtypeFloat32);
    put_u64(bytes.data() + 12, m.rows());
    put_u64(bytes.data() + 20, m.cols());
    for (std::size_t i = 0; i < values.size(); ++i)
        put_u32(bytes.data() + kHeaderBytes + 4 * i, std::bit_cast<std::uint32_t>(values[i]));
    write_file_atomic(path, bytes);
    return bytes.size();
}

MatrixF load_matrix(const fs::path& path) {
    Reader r = open_and_read_header(path);
    MatrixF m(r.shape.rows, r.shape.cols);
    auto data = m.data();
    for (std::size_t first = 0; first < data.size(); first += kChunkFloats) {
        const std::size_t n = std::min(kChunkFloats, data.size() - first);
        read_floats(r, first, data.subspan(first, n));
    }
    return m;
}

MatrixShape read_shape(const fs::path& path) { return open_and_read_header(path).shape; }

MatrixShape inspect_matrix(const fs::path& path, const ChunkVisitor& visit) {
    Reader r = open_and_read_header(path);
    const std::size_t total = r.shape.rows * r.shape.cols;
    std::vector<float> chunk(std::min(kChunkFloats, total));
    for (std::size_t first = 0; first < total; first += kChunkFloats) {
        const std::size_t n = std::min(kChunkFloats, total - first);
        std::span<float> view(chunk.data(), n);
        read_floats(r, first, view);
        if (visit) visit(first, view);
    }
    return r.shape;
}

// ---------------------------------------------------------------------------

std::string_view category_name(Category c) noexcept {
    switch (c) {
        case Category::Material: return "material";
        case Category::Object: return "object";
        case Category::Scene: return "scene";
        case Category::Texture: return "texture";
        case Category::Color: return "color";
        case Category::Part: return "part";
        case Category::Other: return "other";
    }
    return "other";
}

std::optional<Category> parse_category(std::string_view name) noexcept {
    for (Category c : kAllCategories)
        if (category_name(c) == name) return c;
    return std::nullopt;
}

std::optional<std::size_t> ConceptSpace::index_of(std::string_view word) const {
    for (std::size_t i = 0; i < concepts.size(); ++i)
        if (concepts[i].word == word) return i;
    return std::nullopt;
}

std::uint64_t ConceptSpace::fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char b) {
        h ^= b;
        h *= 0x100000001b3ULL;
    };
    for (const auto& c : concepts) {
        for (unsigned char b : c.word) mix(b);
        mix(0);
    }
    return h;
}

ConceptSpace make_concept_space(std::vector<ConceptEntry> concepts, MatrixD embeddings,
                                std::optional<MatrixD> probe_sims, std::optional<MatrixD> probe_labels) {
    if (concepts.empty()) throw InputError("concept space is empty");
    std::set<std::string_view> seen;
    for (const auto& c : concepts) {
        if (c.word.empty()) throw InputError("empty concept word");
        if (!seen.insert(c.word).second) throw InputError("duplicate concept: " + c.word);
    }
    if (embeddings.rows() != concepts.size())
        throw InputError("concept embeddings have " + std::to_string(embeddings.rows()) + " rows for " +
                         std::to_string(concepts.size()) + " concepts");
    if (embeddings.cols() == 0) throw InputError("concept embeddings have zero width");
    check_unit_rows(embeddings, "concept embedding");
    if (probe_sims && probe_sims->cols() != concepts.size())
        throw InputError("probe_sims has " + std::to_string(probe_sims->cols()) + " columns for " +
                         std::to_string(concepts.size()) + " concepts");
    if (probe_labels) {
        if (probe_labels->cols() != concepts.size())
            throw InputError("probe_labels has " + std::to_string(probe_labels->cols()) + " columns for " +
                             std::to_string(concepts.size()) + " concepts");
        if (probe_sims && probe_sims->rows() != probe_labels->rows())
            throw InputError("probe_sims and probe_labels disagree on probe count");
        for (double v : probe_labels->data())
            if (v != 0.0 && v != 1.0) throw InputError("probe_labels is not binary");
    }
    return ConceptSpace{std::move(concepts), std::move(embeddings), std::move(probe_sims),
                        std::move(probe_labels)};
}

AnchorSet make_anchor_set(std::vector<std::string> words, MatrixD embeddings) {
    if (words.empty()) throw InputError("anchor set is empty");
    std::set<std::string_view> seen;
    for (const auto& w : words) {
        if (w.empty()) throw InputError("empty anchor word");
        if (!seen.insert(w).second) throw InputError("duplicate anchor: " + w);
    }
    if (embeddings.rows() != words.size())
        throw InputError("anchor embeddings have " + std::to_string(embeddings.rows()) + " rows for " +
                         std::to_string(words.size()) + " anchors");
    check_unit_rows(embeddings, "anchor embedding");
    return AnchorSet{std::move(words), std::move(embeddings)};
}

AnchorSet anchors_from_concepts(const ConceptSpace& space) {
    AnchorSet a;
    a.words.reserve(space.size());
    for (const auto& c : space.concepts) a.words.push_back(c.word);
    a.embeddings = space.embeddings;
    return a;
}

std::vector<ConceptEntry> read_concept_tsv(const fs::path& path) {
    std::vector<ConceptEntry> out;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto parts = split_tab(lines[i]);
        const std::string where = path.string() + ":" + std::to_string(i + 1);
        if (parts.size() != 2) throw InputError(where + ": expected word<TAB>category");
        const auto cat = parse_category(parts[1]);
        if (!cat) throw InputError(where + ": unknown category '" + parts[1] + "'");
        if (parts[0].empty()) throw InputError(where + ": empty word");
        out.push_back({parts[0], *cat});
    }
    return out;
}

void write_concept_tsv(const std::vector<ConceptEntry>& concepts, const fs::path& path) {
    std::string text;
    for (const auto& c : concepts) {
        text += c.word;
        text += '\t';
        text += category_name(c.category);
        text += '\n';
    }
    write_file_atomic(path, text);
}

std::vector<std::string> read_anchor_tsv(const fs::path& path) {
    std::vector<std::string> out;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto parts = split_tab(lines[i]);
        if (parts.size() > 2 || parts[0].empty())
            throw InputError(path.string() + ":" + std::to_string(i + 1) + ": expected one word per line");
        out.push_back(parts[0]);
    }
    return out;
}

void write_anchor_tsv(const std::vector<std::string>& words, const fs::path& path) {
    std::string text;
    for (const auto& w : words) {
        text += w;
        text += '\n';
    }
    write_file_atomic(path, text);
}

fs::path sibling_matrix_path(const fs::path& tsv) {
    fs::path p = tsv;
    p.replace_extension(".cmtx");
    return p;
}

AnchorSet load_anchor_set(const fs::path& tsv) {
    auto words = read_anchor_tsv(tsv);
    return make_anchor_set(std::move(words), matrix_cast<double>(load_matrix(sibling_matrix_path(tsv))));
}

}  // namespace concept_monitor::store
