#include <doctest.h>

#include <cmath>

#include "concept_monitor/diversity.hpp"
#include "concept_monitor/errors.hpp"
#include "concept_monitor/sandbox.hpp"

using namespace concept_monitor;
using namespace concept_monitor::sandbox;

TEST_SUITE("sandbox") {

TEST_CASE("problem generation is seeded and well-formed") {
    const SandboxSpec spec;
    const auto a = make_problem(spec), b = make_problem(spec);
    CHECK(a.features == b.features);
    CHECK(a.probe_sims == b.probe_sims);
    CHECK(a.labels == b.labels);
    CHECK(a.features.rows() == 64);
    CHECK(a.features.cols() == 16);
    CHECK(a.initial_weights.cols() == 8);
    CHECK(a.concept_embeddings.rows() == 12);
    CHECK(a.anchor_embeddings == a.concept_embeddings);
    SandboxSpec other = spec;
    other.seed = 8;
    CHECK_FALSE(make_problem(other).features == a.features);
    other = spec;
    other.classes = 1;
    CHECK_THROWS_AS((void)make_problem(other), InputError);
}

TEST_CASE("zero steps reports only the initial metrics") {
    SandboxSpec spec;
    spec.steps = 0;
    const auto prob = make_problem(spec);
    const auto trace = train(prob, {});
    REQUIRE(trace.size() == 1);
    CHECK(trace[0].step == 0);
    const auto params = initial_parameters(prob);
    const MatrixD q = activations(prob, params);
    const diversity::AnchorDistanceObjective f(prob.probe_sims, prob.concept_embeddings, prob.anchor_embeddings, 0.01);
    CHECK(trace[0].d_anchor == f.value(q));
    CHECK(trace[0].task_loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));  // zero head: uniform predictions
}

TEST_CASE("beta = 0 is bit-identical to dropping the regularizer gradient") {
    SandboxSpec spec;
    spec.steps = 40;
    const auto prob = make_problem(spec);
    const auto a = train(prob, {0.0, 0.01});
    TrainOptions opt;
    opt.zero_regularizer_gradient = true;
    const auto b = train(prob, {1.0, 0.01}, opt);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].d_anchor == b[i].d_anchor);
        CHECK(a[i].task_loss == b[i].task_loss);
    }
}

TEST_CASE("joint gradient is linear in beta") {
    const auto prob = make_problem({});
    const auto params = initial_parameters(prob);
    const diversity::AnchorDistanceObjective f(prob.probe_sims, prob.concept_embeddings, prob.anchor_embeddings, 0.1);
    const auto g0 = joint_gradient(prob, params, f, 0.0);
    const auto g1 = joint_gradient(prob, params, f, 1.0);
    const auto g2 = joint_gradient(prob, params, f, 2.0);
    for (std::size_t i = 0; i < g0.weights.size(); ++i) {
        const double reg = g1.weights.data()[i] - g0.weights.data()[i];
        CHECK(g2.weights.data()[i] == doctest::Approx(g0.weights.data()[i] + 2 * reg).epsilon(1e-12));
    }
    CHECK(g0.head == g2.head);
    CHECK(g0.bias == g2.bias);
}

TEST_CASE("training is deterministic and reduces the task loss") {
    SandboxSpec spec;
    spec.steps = 60;
    const auto prob = make_problem(spec);
    const auto a = train(prob, {}), b = train(prob, {});
    REQUIRE(a.size() == 61);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].task_loss == b[i].task_loss);
        CHECK(a[i].d_anchor == b[i].d_anchor);
    }
    CHECK(a.back().task_loss < a.front().task_loss);
}

TEST_CASE("divergence aborts with the step index") {
    SandboxSpec spec;
    spec.step_size = 1e200;
    spec.steps = 50;
    const auto prob = make_problem(spec);
    CHECK_THROWS_WITH_AS((void)train(prob, {}), doctest::Contains("non-finite loss at step"), ComputeError);
}

}  // TEST_SUITE
