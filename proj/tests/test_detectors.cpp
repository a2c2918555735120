#include <doctest.h>

#include <cmath>
#include <numeric>

#include "concept_monitor/detectors.hpp"
#include "concept_monitor/errors.hpp"
#include "concept_monitor/fixtures.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace concept_monitor;
using namespace concept_monitor::detect;

namespace {

MatrixD col(std::initializer_list<double> v) { return MatrixD(v.size(), 1, std::vector<double>(v)); }

store::ConceptSpace space_of(std::size_t concepts, std::size_t dim = 2) {
    std::vector<store::ConceptEntry> e;
    MatrixD emb(concepts, dim);
    for (std::size_t i = 0; i < concepts; ++i) {
        e.push_back({"w" + std::to_string(i), store::kAllCategories[i % store::kCategoryCount]});
        emb(i, i % dim) = 1.0;
    }
    return store::make_concept_space(std::move(e), std::move(emb));
}

SimilarityMatrix sims_of(std::size_t rows, std::size_t cols, std::vector<double> v, DetectorKind kind = DetectorKind::Cos3) {
    return {MatrixD(rows, cols, std::move(v)), DetectorConfig::defaults(kind)};
}

double max_abs_diff(const MatrixD& a, const MatrixD& b) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace

TEST_SUITE("detectors") {

TEST_CASE("defaults and validation") {
    CHECK(DetectorConfig::defaults(DetectorKind::Cos3).tau == 0.1);
    CHECK(DetectorConfig::defaults(DetectorKind::SoftWpmi).tau == 0.1);
    CHECK(DetectorConfig::defaults(DetectorKind::Iou).tau == 0.04);
    const auto w = DetectorConfig::defaults(DetectorKind::SoftWpmi);
    CHECK(w.lambda == 1.0);
    CHECK(w.gamma == 0.05);
    CHECK(w.steepness == 10.0);
    CHECK(w.effective_top_k(2000) == 100);
    CHECK(w.effective_top_k(250) == 25);
    CHECK(w.effective_top_k(5) == 1);
    CHECK(DetectorConfig::defaults(DetectorKind::Iou).quantile == 0.05);
    auto bad = w;
    bad.gamma = 0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = DetectorConfig::defaults(DetectorKind::Iou);
    bad.quantile = 1.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad.quantile = 0.05;
    bad.tau = NAN;
    CHECK_THROWS_AS(bad.validate(), InputError);
    CHECK(parse_detector("soft_wpmi") == DetectorKind::SoftWpmi);
    CHECK_FALSE(parse_detector("clip").has_value());
}

TEST_CASE("cos3 hand examples") {
    CHECK(cos_cubed_sim(col({1, -1, 0}), col({1, -1, 0})).values(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cos_cubed_sim(col({1, -1, 0}), col({-1, 1, 0})).values(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(std::abs(cos_cubed_sim(col({4, 1, 1}), col({1, 0, 1})).values(0, 0) - 15.0 / 66.0) < 1e-12);
}

TEST_CASE("cos3 constant columns give zero, not NaN") {
    const MatrixD q(3, 2, {1, 2, 1, 5, 1, 7});
    const MatrixD p(3, 2, {3, 0, 3, 1, 3, 4});
    const auto s = cos_cubed_sim(q, p).values;
    CHECK(s(0, 0) == 0.0);
    CHECK(s(0, 1) == 0.0);
    CHECK(s(1, 0) == 0.0);
    CHECK(std::isfinite(s(1, 1)));
}

TEST_CASE("cos3 input errors") {
    CHECK_THROWS_AS((void)cos_cubed_sim(MatrixD(3, 1), MatrixD(4, 1)), InputError);
    CHECK_THROWS_AS((void)cos_cubed_sim(MatrixD(1, 1), MatrixD(1, 1)), InputError);
}

TEST_CASE("cos3 matches the brute-force oracle and stays in [-1, 1]") {
    fixtures::Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng() % 15, s = 1 + rng() % 8, m = 1 + rng() % 4;
        const MatrixD q = fixtures::gaussian_matrix(rng, n, m), p = fixtures::gaussian_matrix(rng, n, s);
        const auto got = cos_cubed_sim(q, p).values;
        CHECK(max_abs_diff(got, oracle::cos3(q, p)) <= 1e-10);
        for (double v : got.data()) CHECK((v >= -1.0 && v <= 1.0));
    }
}

TEST_CASE("cos3 is invariant to positive scaling and to shifts of a neuron") {
    fixtures::Rng rng(22);
    const MatrixD q = fixtures::gaussian_matrix(rng, 12, 3), p = fixtures::gaussian_matrix(rng, 12, 5);
    const auto base = cos_cubed_sim(q, p).values;
    const auto space = space_of(5);
    const auto cfg = DetectorConfig::defaults(DetectorKind::Cos3);
    const auto base_assign = assign_concepts({base, cfg}, space, cfg);
    for (double c : {0.001, 0.5, 3.0, 1e4}) {
        MatrixD scaled = q;
        for (std::size_t k = 0; k < 12; ++k) scaled(k, 1) *= c;
        CHECK(max_abs_diff(cos_cubed_sim(scaled, p).values, base) <= 1e-12);
    }
    MatrixD shifted = q;
    for (std::size_t k = 0; k < 12; ++k) shifted(k, 2) += 7.5;
    const auto a = assign_concepts(cos_cubed_sim(shifted, p), space, cfg);
    for (std::size_t n = 0; n < 3; ++n) CHECK(a.neurons[n].concept_index == base_assign.neurons[n].concept_index);
}

TEST_CASE("permuting concepts permutes columns and keeps the assigned word") {
    fixtures::Rng rng(23);
    const MatrixD q = fixtures::gaussian_matrix(rng, 10, 3), p = fixtures::gaussian_matrix(rng, 10, 4);
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    MatrixD pp(10, 4);
    for (std::size_t k = 0; k < 10; ++k)
        for (std::size_t i = 0; i < 4; ++i) pp(k, i) = p(k, perm[i]);
    const auto s = cos_cubed_sim(q, p).values, sp = cos_cubed_sim(q, pp).values;
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t i = 0; i < 4; ++i) CHECK(sp(n, i) == s(n, perm[i]));

    const auto space = space_of(4);
    std::vector<store::ConceptEntry> permuted;
    MatrixD emb(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        permuted.push_back(space.concepts[perm[i]]);
        for (std::size_t k = 0; k < 2; ++k) emb(i, k) = space.embeddings(perm[i], k);
    }
    const auto space_p = store::make_concept_space(permuted, emb);
    const auto cfg = DetectorConfig::defaults(DetectorKind::Cos3);
    const auto a = assign_concepts({s, cfg}, space, cfg), b = assign_concepts({sp, cfg}, space_p, cfg);
    for (std::size_t n = 0; n < 3; ++n)
        CHECK(space.concepts[a.neurons[n].concept_index].word == space_p.concepts[b.neurons[n].concept_index].word);
}

TEST_CASE("soft-WPMI: no probe included and uniform P ties every concept") {
    auto cfg = DetectorConfig::defaults(DetectorKind::SoftWpmi);
    cfg.top_k = 1;
    const MatrixD q(4, 1, {2, 2, 2, 2});
    const MatrixD p(4, 3, std::vector<double>(12, 0.3));
    const auto s = soft_wpmi_sim(q, p, cfg);
    // constant column: sigma falls back to 1, theta = 2 and every s_k = 1/2
    CHECK(s.values(0, 0) == s.values(0, 1));
    CHECK(s.values(0, 1) == s.values(0, 2));
    CHECK(assign_concepts(s, space_of(3), cfg).neurons[0].concept_index == 0);

    // s_k -> 0 everywhere: only the marginal term remains, constant under uniform P
    const std::vector<double> none = {0, 0, 0, 0};
    const auto lp = concept_log_probs(p, cfg.gamma);
    const auto lm = concept_log_marginal(lp);
    const auto scores = soft_wpmi_scores(none, lp, lm, 1.0);
    CHECK(scores[0] == doctest::Approx(std::log(3.0)).epsilon(1e-14));
    CHECK(scores[0] == scores[1]);
    CHECK(scores[1] == scores[2]);
}

TEST_CASE("soft-WPMI single-image reduction with lambda = 0") {
    fixtures::Rng rng(31);
    const MatrixD p = fixtures::uniform_matrix(rng, 5, 4, 0.0, 0.3);
    const auto lp = concept_log_probs(p, 0.05);
    const auto lm = concept_log_marginal(lp);
    const std::vector<double> one = {0, 0, 1, 0, 0};
    const auto scores = soft_wpmi_scores(one, lp, lm, 0.0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(scores[i] == doctest::Approx(lp(2, i)).epsilon(1e-14));
        if (p(2, i) > p(2, best)) best = i;
    }
    CHECK(static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin()) == best);
}

TEST_CASE("soft-WPMI 3 images x 2 concepts x 1 neuron matches the term-by-term oracle") {
    const MatrixD q(3, 1, {0.9, 0.2, 0.4});
    const MatrixD p(3, 2, {0.30, 0.22, 0.18, 0.27, 0.25, 0.24});
    auto cfg = DetectorConfig::defaults(DetectorKind::SoftWpmi);
    cfg.top_k = 1;
    const auto got = soft_wpmi_sim(q, p, cfg).values;
    const auto want = oracle::soft_wpmi(q, p, {0.05, 1.0, 1, 10.0});
    CHECK(max_abs_diff(got, want) <= 1e-10);
}

TEST_CASE("soft-WPMI matches the oracle on random instances") {
    fixtures::Rng rng(32);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng() % 15, s = 1 + rng() % 8, m = 1 + rng() % 4;
        const MatrixD q = fixtures::gaussian_matrix(rng, n, m);
        const MatrixD p = fixtures::uniform_matrix(rng, n, s, -0.1, 0.4);
        auto cfg = DetectorConfig::defaults(DetectorKind::SoftWpmi);
        cfg.top_k = 1 + rng() % n;
        cfg.lambda = fixtures::uniform(rng) * 2;
        const auto got = soft_wpmi_sim(q, p, cfg).values;
        CHECK(max_abs_diff(got, oracle::soft_wpmi(q, p, {cfg.gamma, cfg.lambda, *cfg.top_k, cfg.steepness})) <= 1e-10);
    }
}

TEST_CASE("soft-WPMI rejects K > N_probe") {
    auto cfg = DetectorConfig::defaults(DetectorKind::SoftWpmi);
    cfg.top_k = 5;
    CHECK_THROWS_AS((void)soft_wpmi_sim(MatrixD(4, 1, {1, 2, 3, 4}), MatrixD(4, 1), cfg), InputError);
}

TEST_CASE("IoU hand examples") {
    auto cfg = DetectorConfig::defaults(DetectorKind::Iou);
    cfg.quantile = 0.5;
    const MatrixD q = col({0.9, 0.8, 0.1, 0.0});
    CHECK(activation_threshold(q.data(), 0.5) == 0.1);
    CHECK(iou_sim(q, col({1, 0, 1, 0}), cfg).values(0, 0) == 1.0 / 3.0);
    CHECK(iou_sim(q, col({0, 0, 0, 0}), cfg).values(0, 0) == 0.0);
    CHECK(iou_sim(q, col({1, 1, 0, 0}), cfg).values(0, 0) == 1.0);
}

TEST_CASE("IoU matches the oracle exactly and stays in [0, 1]") {
    fixtures::Rng rng(41);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng() % 15, s = 1 + rng() % 8, m = 1 + rng() % 4;
        MatrixD q = fixtures::gaussian_matrix(rng, n, m);
        if (t % 5 == 0)
            for (std::size_t k = 0; k < n; ++k) q(k, 0) = std::round(q(k, 0));  // ties
        MatrixD labels(n, s);
        for (double& v : labels.data()) v = fixtures::uniform(rng) < 0.4 ? 1.0 : 0.0;
        auto cfg = DetectorConfig::defaults(DetectorKind::Iou);
        cfg.quantile = std::vector<double>{0.05, 0.1, 0.25, 0.5}[t % 4];
        const auto got = iou_sim(q, labels, cfg).values;
        CHECK(got == oracle::iou(q, labels, cfg.quantile));
        for (double v : got.data()) CHECK((v >= 0.0 && v <= 1.0));
    }
}

TEST_CASE("IoU is 1 exactly when the activated set equals the label set") {
    fixtures::Rng rng(42);
    auto cfg = DetectorConfig::defaults(DetectorKind::Iou);
    cfg.quantile = 0.25;
    const MatrixD q = fixtures::gaussian_matrix(rng, 12, 1);
    const double theta = activation_threshold(q.data(), cfg.quantile);
    MatrixD labels(12, 2);
    for (std::size_t k = 0; k < 12; ++k) {
        labels(k, 0) = q(k, 0) > theta ? 1.0 : 0.0;
        labels(k, 1) = labels(k, 0);
    }
    labels(0, 1) = 1.0 - labels(0, 1);
    const auto s = iou_sim(q, labels, cfg).values;
    CHECK(s(0, 0) == 1.0);
    CHECK(s(0, 1) < 1.0);
}

TEST_CASE("IoU rejects non-binary labels") {
    CHECK_THROWS_AS((void)iou_sim(col({1, 2, 3}), col({1, 0.5, 0}), DetectorConfig::defaults(DetectorKind::Iou)),
                    InputError);
}

TEST_CASE("compute_similarity needs the matching probe inputs") {
    const auto space = space_of(2);  // neither probe_sims nor labels
    CHECK_THROWS_AS((void)compute_similarity(MatrixD(3, 1), space, DetectorConfig::defaults(DetectorKind::Cos3)),
                    InputError);
    CHECK_THROWS_AS((void)compute_similarity(MatrixD(3, 1), space, DetectorConfig::defaults(DetectorKind::Iou)),
                    InputError);
}

TEST_CASE("assign_concepts: argmax, lowest-index ties, strict threshold") {
    auto cfg = DetectorConfig::defaults(DetectorKind::Cos3);
    cfg.tau = 0.16;
    const auto space = space_of(3);
    auto a = assign_concepts(sims_of(1, 3, {0.3, 0.1, 0.05}), space, cfg);
    CHECK(a.neurons[0].concept_index == 0);
    CHECK(a.neurons[0].interpretable);
    CHECK(a.neurons[0].category == space.concepts[0].category);

    a = assign_concepts(sims_of(1, 3, {0.1, 0.1, 0.0}), space, cfg);
    CHECK(a.neurons[0].concept_index == 0);
    CHECK_FALSE(a.neurons[0].interpretable);

    a = assign_concepts(sims_of(1, 3, {0.0, 0.16, 0.16}), space, cfg);
    CHECK(a.neurons[0].concept_index == 1);
    CHECK_FALSE(a.neurons[0].interpretable);  // equal to tau is not above it

    CHECK_THROWS_AS((void)assign_concepts(sims_of(1, 2, {0.1, 0.2}), space, cfg), InputError);
}

}  // TEST_SUITE
