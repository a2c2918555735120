#include <doctest.h>

#include <fstream>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/fixtures.hpp"
#include "concept_monitor/manifest.hpp"
#include "support.hpp"

using namespace concept_monitor;
using namespace concept_monitor::store;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

fixtures::RunSpec small_spec() {
    fixtures::RunSpec s = fixtures::reference_spec();
    s.probes = 200;
    return s;
}

bool has_failure(const ValidationReport& r, const std::string& needle) {
    for (const auto* f : r.failures())
        if (f->message.find(needle) != std::string::npos) return true;
    return false;
}

void patch_byte(const fs::path& p, std::size_t offset, char value) {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(offset));
    f.put(value);
}

}  // namespace

TEST_SUITE("manifest") {

TEST_CASE("synthetic 2-layer x 3-checkpoint run passes every check") {
    TempDir dir("mf");
    const auto path = fixtures::write_synthetic_run(small_spec(), dir.path());
    const auto report = validate_run(path);
    CHECK(report.passed());
    CHECK(report.failures().empty());
    // concept + anchor + probe files, then 3 checks per checkpoint and 2 per layer
    CHECK(report.checks.size() >= 2 * 3 * 3 + 2 * 2);
}

TEST_CASE("activation file with too few rows fails the probe count check") {
    TempDir dir("mf");
    const auto path = fixtures::write_synthetic_run(small_spec(), dir.path());
    write_matrix(MatrixF(100, 16), dir / "layer4_e5.cmtx");
    const auto report = validate_run(path);
    CHECK_FALSE(report.passed());
    CHECK(has_failure(report, "probe count mismatch layer=layer4, epoch=5"));
    REQUIRE(report.failures().size() == 1);
}

TEST_CASE("anchor dimension must match the concept dimension") {
    TempDir dir("mf");
    const auto path = fixtures::write_synthetic_run(small_spec(), dir.path());
    fixtures::Rng rng(1);
    write_matrix(matrix_cast<float>(fixtures::unit_rows(fixtures::gaussian_matrix(rng, 6, 32))), dir / "anchors.cmtx");
    const auto report = validate_run(path);
    CHECK(has_failure(report, "embedding dimension mismatch"));
}

TEST_CASE("any single-field corruption flips validation to fail") {
    struct Corruption {
        const char* name;
        void (*apply)(const fs::path& dir);
    };
    const Corruption cases[] = {
        {"magic", [](const fs::path& d) { patch_byte(d / "layer3_e0.cmtx", 0, 'X'); }},
        {"rows", [](const fs::path& d) { patch_byte(d / "layer3_e5.cmtx", 12, 7); }},
        {"cols", [](const fs::path& d) { patch_byte(d / "concepts.cmtx", 20, 9); }},
        {"payload length",
         [](const fs::path& d) { fs::resize_file(d / "probe_sims.cmtx", fs::file_size(d / "probe_sims.cmtx") - 4); }},
        {"neuron count",
         [](const fs::path& d) {
             auto m = parse_manifest(d / "manifest.json");
             m.layers[1].neurons = 17;
             write_manifest(m, d / "manifest.json");
         }},
        {"probe count",
         [](const fs::path& d) {
             auto m = parse_manifest(d / "manifest.json");
             m.probe_count = 199;
             m.probe_images.clear();
             write_manifest(m, d / "manifest.json");
         }},
        {"labels not binary",
         [](const fs::path& d) {
             MatrixF l = load_matrix(d / "probe_labels.cmtx");
             l(3, 2) = 0.5f;
             write_matrix(l, d / "probe_labels.cmtx");
         }},
        {"concept not unit norm",
         [](const fs::path& d) {
             MatrixF e = load_matrix(d / "concepts.cmtx");
             e(2, 0) += 0.01f;
             write_matrix(e, d / "concepts.cmtx");
         }},
        {"missing file", [](const fs::path& d) { fs::remove(d / "layer4_e10.cmtx"); }},
        {"epochs not increasing",
         [](const fs::path& d) {
             auto m = parse_manifest(d / "manifest.json");
             std::swap(m.layers[0].checkpoints[0].epoch, m.layers[0].checkpoints[1].epoch);
             write_manifest(m, d / "manifest.json");
         }},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        TempDir dir("mf");
        const auto path = fixtures::write_synthetic_run(small_spec(), dir.path());
        REQUIRE(validate_run(path).passed());
        c.apply(dir.path());
        CHECK_FALSE(validate_run(path).passed());
        CHECK_THROWS_AS((void)open_run(path), InputError);
    }
}

TEST_CASE("unparseable manifests report line/column or the field path") {
    const fs::path base = ".";
    try {
        (void)parse_manifest_text("{\n  \"run_id\": \"x\",\n  oops\n}", base);
        FAIL("expected parse failure");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    const std::string missing_epoch = R"({"run_id":"r","probe_count":2,
        "concepts":{"words":"c.tsv","embeddings":"c.cmtx"},
        "layers":[{"name":"l","neurons":1,"checkpoints":[{"epoch":0,"activations":"a"},{"activations":"b"}]}]})";
    CHECK_THROWS_WITH_AS((void)parse_manifest_text(missing_epoch, base),
                         doctest::Contains("layers[0].checkpoints[1].epoch"), InputError);
    const std::string bad_type = R"({"run_id":"r","probe_count":-2,
        "concepts":{"words":"c.tsv","embeddings":"c.cmtx"},"layers":[]})";
    CHECK_THROWS_WITH_AS((void)parse_manifest_text(bad_type, base), doctest::Contains("probe_count"), InputError);
    CHECK_THROWS_AS((void)parse_manifest("/nonexistent/manifest.json"), InputError);
}

TEST_CASE("unknown keys are ignored and relative paths resolve against the manifest directory") {
    const std::string text = R"({"run_id":"r","probe_count":2,"future_key":{"x":1},
        "concepts":{"words":"c.tsv","embeddings":"sub/c.cmtx"},
        "layers":[{"name":"l","neurons":1,"checkpoints":[{"epoch":3,"activations":"/abs/a.cmtx"}]}]})";
    const auto m = parse_manifest_text(text, "/data/run");
    CHECK(m.resolve(m.concepts.embeddings) == fs::path("/data/run/sub/c.cmtx"));
    CHECK(m.resolve(m.layers[0].checkpoints[0].activations) == fs::path("/abs/a.cmtx"));
    CHECK(m.find_checkpoint("l", 3) != nullptr);
    CHECK(m.find_checkpoint("l", 4) == nullptr);
}

TEST_CASE("manifest_to_json parses back to the same manifest") {
    TempDir dir("mf");
    const auto path = fixtures::write_synthetic_run(small_spec(), dir.path());
    const auto m = parse_manifest(path);
    const auto again = parse_manifest_text(manifest_to_json(m), dir.path());
    CHECK(manifest_to_json(again) == manifest_to_json(m));
    CHECK(again.probe_images.size() == 200);
    CHECK(again.layers.size() == 2);
}

TEST_CASE("open_run loads activations and reports missing checkpoints") {
    TempDir dir("mf");
    const auto path = fixtures::write_synthetic_run(small_spec(), dir.path());
    const Run run = open_run(path);
    CHECK(run.space.size() == 24);
    REQUIRE(run.anchors.has_value());
    CHECK(run.anchors->size() == 6);
    const MatrixD q = run.load_activations("layer4", 10);
    CHECK(q.rows() == 200);
    CHECK(q.cols() == 16);
    CHECK_THROWS_WITH_AS((void)run.load_activations("layer4", 999), "checkpoint not found: layer4@999", InputError);
    CHECK_THROWS_WITH_AS((void)run.load_activations("layer9", 0), "checkpoint not found: layer9@0", InputError);
}

}  // TEST_SUITE
