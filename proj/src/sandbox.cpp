#include "concept_monitor/sandbox.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/fixtures.hpp"

namespace concept_monitor::sandbox {

SandboxProblem make_problem(const SandboxSpec& spec) {
    if (spec.probes < 2 || spec.features == 0 || spec.neurons == 0 || spec.concepts == 0 || spec.classes < 2 ||
        spec.embedding_dim < 2)
        throw InputError("sandbox dimensions out of range");
    if (!(spec.step_size > 0.0) || !std::isfinite(spec.step_size)) throw InputError("step size must be > 0");
    fixtures::Rng rng(spec.seed);
    SandboxProblem p;
    p.features = fixtures::gaussian_matrix(rng, spec.probes, spec.features);

    // Concept responses are noisy linear read-outs of the features, so a neuron
    // can align with a concept by rotating its weight vector.
    const MatrixD readout = fixtures::gaussian_matrix(rng, spec.features, spec.concepts);
    p.probe_sims = MatrixD(spec.probes, spec.concepts);
    for (std::size_t k = 0; k < spec.probes; ++k)
        for (std::size_t i = 0; i < spec.concepts; ++i) {
            double s = 0.0;
            for (std::size_t f = 0; f < spec.features; ++f) s += p.features(k, f) * readout(f, i);
            p.probe_sims(k, i) = 0.2 * std::tanh(s / std::sqrt(static_cast<double>(spec.features))) +
                                 0.02 * fixtures::gaussian(rng);
        }
    p.concept_embeddings = fixtures::unit_rows(fixtures::gaussian_matrix(rng, spec.concepts, spec.embedding_dim));
    p.anchor_embeddings = p.concept_embeddings;

    // Labels: class c scores the concepts i with i % classes == c, so concept-aligned
    // neurons are useful to the task.
    p.classes = spec.classes;
    p.labels.resize(spec.probes);
    for (std::size_t k = 0; k < spec.probes; ++k) {
        std::vector<double> score(spec.classes, 0.0);
        for (std::size_t i = 0; i < spec.concepts; ++i) {
            double s = 0.0;
            for (std::size_t f = 0; f < spec.features; ++f) s += p.features(k, f) * readout(f, i);
            score[i % spec.classes] += s;
        }
        p.labels[k] = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
    }

    p.initial_weights = fixtures::gaussian_matrix(rng, spec.features, spec.neurons);
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.features));
    for (double& w : p.initial_weights.data()) w *= scale;
    p.step_size = spec.step_size;
    p.steps = spec.steps;
    return p;
}

Parameters initial_parameters(const SandboxProblem& prob) {
    return {prob.initial_weights, MatrixD(prob.initial_weights.cols(), prob.classes),
            std::vector<double>(prob.classes, 0.0)};
}

MatrixD activations(const SandboxProblem& prob, const Parameters& params) {
    const MatrixD& x = prob.features;
    MatrixD q(x.rows(), params.weights.cols());
    for (std::size_t k = 0; k < x.rows(); ++k)
        for (std::size_t f = 0; f < x.cols(); ++f) {
            const double xv = x(k, f);
            for (std::size_t n = 0; n < q.cols(); ++n) q(k, n) += xv * params.weights(f, n);
        }
    return q;
}

TaskTerms task_terms(const SandboxProblem& prob, const Parameters& params, const MatrixD& q) {
    const std::size_t n_probe = q.rows(), n_neurons = q.cols(), classes = prob.classes;
    TaskTerms t{0.0, 0.0, MatrixD(n_probe, n_neurons), MatrixD(n_neurons, classes), std::vector<double>(classes, 0.0)};
    std::vector<double> logits(classes);
    std::size_t correct = 0;
    const double inv_n = 1.0 / static_cast<double>(n_probe);
    for (std::size_t k = 0; k < n_probe; ++k) {
        for (std::size_t c = 0; c < classes; ++c) {
            double v = params.bias[c];
            for (std::size_t n = 0; n < n_neurons; ++n) v += q(k, n) * params.head(n, c);
            logits[c] = v;
        }
        const auto top = std::max_element(logits.begin(), logits.end());
        if (static_cast<std::size_t>(top - logits.begin()) == prob.labels[k]) ++correct;
        const double hi = *top;
        double z = 0.0;
        for (double v : logits) z += std::exp(v - hi);
        const double log_z = hi + std::log(z);
        t.loss += (log_z - logits[prob.labels[k]]) * inv_n;
        for (std::size_t c = 0; c < classes; ++c) {
            const double g = (std::exp(logits[c] - log_z) - (c == prob.labels[k] ? 1.0 : 0.0)) * inv_n;
            t.grad_bias[c] += g;
            for (std::size_t n = 0; n < n_neurons; ++n) {
                t.grad_head(n, c) += q(k, n) * g;
                t.grad_activations(k, n) += params.head(n, c) * g;
            }
        }
    }
    t.accuracy = static_cast<double>(correct) * inv_n;
    return t;
}

JointGradient joint_gradient(const SandboxProblem& prob, const Parameters& params,
                             const diversity::AnchorDistanceObjective& objective, double beta,
                             const TrainOptions& options) {
    const MatrixD q = activations(prob, params);
    TaskTerms task = task_terms(prob, params, q);
    diversity::ValueAndGradient reg = objective.evaluate(q);
    if (options.zero_regularizer_gradient) reg.gradient = MatrixD(q.rows(), q.cols());

    MatrixD grad_q = std::move(task.grad_activations);
    auto gq = grad_q.data();
    auto gr = reg.gradient.data();
    for (std::size_t i = 0; i < gq.size(); ++i) gq[i] += beta * gr[i];

    JointGradient out;
    out.task_loss = task.loss;
    out.d_anchor = reg.value;
    out.accuracy = task.accuracy;
    out.weights = MatrixD(params.weights.rows(), params.weights.cols());
    const MatrixD& x = prob.features;
    for (std::size_t k = 0; k < x.rows(); ++k)
        for (std::size_t f = 0; f < x.cols(); ++f) {
            const double xv = x(k, f);
            for (std::size_t n = 0; n < grad_q.cols(); ++n) out.weights(f, n) += xv * grad_q(k, n);
        }
    out.head = std::move(task.grad_head);
    out.bias = std::move(task.grad_bias);
    return out;
}

std::vector<TraceRow> train(const SandboxProblem& prob, const diversity::RegularizerConfig& reg,
                            const TrainOptions& options) {
    reg.validate();
    const diversity::AnchorDistanceObjective objective(prob.probe_sims, prob.concept_embeddings,
                                                       prob.anchor_embeddings, reg.temperature);
    Parameters params = initial_parameters(prob);
    std::vector<TraceRow> trace;
    trace.reserve(prob.steps + 1);
    for (std::size_t step = 0;; ++step) {
        const JointGradient g = joint_gradient(prob, params, objective, reg.beta, options);
        const double total = g.task_loss + reg.beta * g.d_anchor;
        if (!std::isfinite(total)) throw ComputeError("non-finite loss at step " + std::to_string(step));
        trace.push_back({step, g.task_loss, g.d_anchor, g.accuracy});
        if (step == prob.steps) break;
        const double lr = prob.step_size;
        auto update = [lr](std::span<double> p, std::span<const double> grad) {
            for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
        };
        update(params.weights.data(), g.weights.data());
        update(params.head.data(), g.head.data());
        update(params.bias, g.bias);
    }
    return trace;
}

}  // namespace concept_monitor::sandbox
