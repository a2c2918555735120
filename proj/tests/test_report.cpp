#include <doctest.h>

#include <cmath>
#include <limits>
#include <regex>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/fixtures.hpp"
#include "concept_monitor/report.hpp"
#include "concept_monitor/tensor_store.hpp"
#include "support.hpp"

using namespace concept_monitor;
using namespace concept_monitor::report;
using testing_support::TempDir;

namespace {

telemetry::Snapshot sample_snapshot(std::uint64_t seed, double tau = 0.1, std::size_t neurons = 7) {
    fixtures::Rng rng(seed);
    const auto space = testing_support::random_space(rng, 9, 6, 25);
    const MatrixD q = testing_support::random_matrix(rng, 25, neurons);
    telemetry::AnalysisConfig cfg;
    cfg.detector.tau = tau;
    cfg.top_k = 3;
    const auto anchors = store::make_anchor_set({space.concepts[0].word, space.concepts[4].word},
                                                MatrixD(2, 6, [&] {
                                                    std::vector<double> v;
                                                    for (std::size_t r : {0u, 4u})
                                                        for (double x : space.embeddings.row(r)) v.push_back(x);
                                                    return v;
                                                }()));
    return telemetry::make_snapshot(q, space, anchors, cfg, {"run-x", "layer4", 12, {}});
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_SUITE("report") {

TEST_CASE("number formatting") {
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(-2.5) == "-2.5");
    CHECK(format_number(1e-12) == "1e-12");
    CHECK(format_number(123456789012.0) == "1.23456789e+11");
    CHECK_THROWS_AS((void)format_number(std::numeric_limits<double>::quiet_NaN()), ComputeError);
    CHECK_THROWS_AS((void)format_number(std::numeric_limits<double>::infinity()), ComputeError);
}

TEST_CASE("canonical dump layout") {
    Json j = {{"b", 1}, {"a", {{"z", true}, {"y", nullptr}}}, {"list", {1.5, 2, -0.0}}, {"s", "x\"y"},
              {"objs", Json::array({{{"k", 1}}})}, {"empty", Json::array()}};
    const std::string expected =
        "{\n"
        "  \"a\": {\n"
        "    \"y\": null,\n"
        "    \"z\": true\n"
        "  },\n"
        "  \"b\": 1,\n"
        "  \"empty\": [],\n"
        "  \"list\": [1.5, 2, 0],\n"
        "  \"objs\": [\n"
        "    {\n"
        "      \"k\": 1\n"
        "    }\n"
        "  ],\n"
        "  \"s\": \"x\\\"y\"\n"
        "}\n";
    CHECK(canonical_dump(j) == expected);
    CHECK_THROWS_AS((void)canonical_dump(Json{{"x", std::nan("")}}), ComputeError);
}

TEST_CASE("snapshot json has the four groups and survives emit-parse-emit byte for byte") {
    TempDir dir("rep");
    const auto s = sample_snapshot(1);
    const auto j = snapshot_to_json(s);
    for (const char* key : {"neurons", "categories", "embedding", "diversity", "config", "concept_space"})
        CHECK(j.contains(key));
    CHECK(j["format"] == kSnapshotFormat);
    CHECK(j["neurons"].size() == 7);
    CHECK(j["embedding"]["anchors"].size() == 2);
    CHECK(j["concept_space"]["fingerprint"].get<std::string>().size() == 16);

    const auto bytes = emit_snapshot_json(s, dir / "a.json");
    const std::string first = testing_support::read_file(dir / "a.json");
    CHECK(bytes == first.size());
    const auto back = read_snapshot_json(dir / "a.json");
    (void)emit_snapshot_json(back, dir / "b.json");
    CHECK(testing_support::read_file(dir / "b.json") == first);
    CHECK(canonical_dump(Json::parse(first)) == first);

    CHECK(back.run_id == "run-x");
    CHECK(back.epoch == 12);
    CHECK(back.concept_fingerprint == s.concept_fingerprint);
    CHECK(back.categories.interpretable == s.categories.interpretable);
    REQUIRE(back.neurons.size() == s.neurons.size());
    for (std::size_t n = 0; n < s.neurons.size(); ++n) {
        CHECK(back.neurons[n].concept_word == s.neurons[n].concept_word);
        CHECK(back.neurons[n].top_images == s.neurons[n].top_images);
        CHECK(back.neurons[n].similarity == doctest::Approx(s.neurons[n].similarity).epsilon(1e-8));
    }
    CHECK(back.d_anchor == doctest::Approx(s.d_anchor).epsilon(1e-8));
}

TEST_CASE("no interpretable neurons gives zero percentages everywhere") {
    const auto s = sample_snapshot(2, 1.0);
    const auto j = snapshot_to_json(s);
    CHECK(j["categories"]["interpretable_count"] == 0);
    CHECK(j["categories"]["category_percentages"].size() == store::kCategoryCount);
    for (const auto& [k, v] : j["categories"]["category_percentages"].items()) CHECK(v.get<double>() == 0.0);
    for (const auto& [k, v] : j["categories"]["category_counts"].items()) CHECK(v.get<int>() == 0);
    CHECK(std::isfinite(j["diversity"]["d_anchor"].get<double>()));
}

TEST_CASE("snapshot parse errors name the field") {
    TempDir dir("rep");
    const auto good = snapshot_to_json(sample_snapshot(3));

    auto broken = good;
    broken["neurons"][2].erase("similarity");
    CHECK_THROWS_WITH_AS((void)snapshot_from_json(broken), doctest::Contains("neurons[2].similarity"), InputError);

    broken = good;
    broken["epoch"] = "ten";
    CHECK_THROWS_WITH_AS((void)snapshot_from_json(broken), doctest::Contains("epoch"), InputError);

    broken = good;
    broken["format"] = "something/else";
    CHECK_THROWS_AS((void)snapshot_from_json(broken), InputError);

    store::write_file_atomic(dir / "bad.json", "{\"format\": ");
    CHECK_THROWS_AS((void)read_snapshot_json(dir / "bad.json"), InputError);
    CHECK_THROWS_AS((void)read_snapshot_json(dir / "missing.json"), InputError);
}

TEST_CASE("embedding svg draws one marker per neuron and one star per anchor") {
    const auto s = sample_snapshot(4);
    const std::string svg = embedding_svg(s);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count(svg, "<circle class=\"neuron\"") == s.neurons.size());
    CHECK(count(svg, "class=\"anchor\"") == s.anchors.size());
    for (const auto& a : s.anchors) CHECK(svg.find(">" + a.word + "<") != std::string::npos);
    CHECK(embedding_svg(s) == svg);

    const std::vector<std::size_t> hl = {1, 3};
    const std::string marked = embedding_svg(s, hl);
    CHECK(count(marked, "<circle class=\"neuron\"") == s.neurons.size());
    CHECK(marked != svg);

    auto bare = s;
    bare.anchors.clear();
    CHECK(count(embedding_svg(bare), "class=\"anchor\"") == 0);

    // every number printed with three decimals
    const std::regex num(R"(=\"-?[0-9]+\.[0-9]{3}\")");
    CHECK(std::sregex_iterator(svg.begin(), svg.end(), num) != std::sregex_iterator());
    CHECK(svg.find("-0.000") == std::string::npos);
}

TEST_CASE("category bars") {
    const auto s = sample_snapshot(5);
    const std::string svg = category_bars_svg(s.categories, "layer4 @ 12");
    CHECK(count(svg, "class=\"bar\"") == store::kCategoryCount);
    for (auto c : store::kAllCategories) CHECK(svg.find(std::string(store::category_name(c))) != std::string::npos);
    CHECK(svg.find("layer4 @ 12") != std::string::npos);
}

TEST_CASE("csv writers") {
    const auto s = sample_snapshot(6);
    const std::string cats = categories_csv(s.categories);
    CHECK(cats.rfind("category,count,percentage\n", 0) == 0);
    CHECK(count(cats, "\n") == store::kCategoryCount + 1);

    const std::vector<diversity::SweepPoint> sweep = {{0.01, 0.5}, {0.1, 0.25}};
    CHECK(sweep_csv(sweep) == "temperature,d_anchor\n0.01,0.5\n0.1,0.25\n");

    const std::vector<ThresholdPoint> th = {{0.1, 3, 37.5}};
    CHECK(threshold_csv(th) == "tau,interpretable_count,interpretable_percentage\n0.1,3,37.5\n");

    const std::vector<EpochDiversity> ed = {{5, 1.5, 0.25, 4}};
    CHECK(diversity_csv(ed) == "epoch,d_anchor,pairwise_diversity,interpretable_count\n5,1.5,0.25,4\n");

    std::vector<sandbox::TraceRow> tr(1);
    tr[0].step = 2;
    tr[0].task_loss = 0.5;
    tr[0].d_anchor = 0.75;
    tr[0].accuracy = 1.0;
    CHECK(trace_csv(tr) == "step,task_loss,d_anchor,accuracy\n2,0.5,0.75,1\n");
}

TEST_CASE("curve svg") {
    std::vector<Series> series = {{"a", {1e-3, 1e-2, 1e-1}, {1, 2, 3}}};
    const std::string log_svg = curve_svg(series, {"t", "x", "y", true});
    const std::string lin_svg = curve_svg(series, {"t", "x", "y", false});
    CHECK(log_svg.find("<polyline") != std::string::npos);
    CHECK(log_svg != lin_svg);
    series[0].x[0] = -1;
    CHECK_THROWS((void)curve_svg(series, {"t", "x", "y", true}));
}

TEST_CASE("comparison and trajectory json") {
    const auto a = sample_snapshot(7), b = sample_snapshot(8);
    const auto c = telemetry::compare_runs(a, b);
    const auto j = comparison_to_json(c);
    CHECK(j["format"] == "concept-monitor/comparison/1");
    CHECK(j["d_anchor"]["delta"].get<double>() == doctest::Approx(a.d_anchor - b.d_anchor));
    CHECK(j["categories"].size() == store::kCategoryCount);
    CHECK(canonical_dump(Json::parse(canonical_dump(j))) == canonical_dump(j));
}

}  // TEST_SUITE
