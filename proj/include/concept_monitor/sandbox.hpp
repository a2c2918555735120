#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "concept_monitor/diversity.hpp"
#include "concept_monitor/matrix.hpp"

namespace concept_monitor::sandbox {

// Desk-scale stand-in for training with the concept-diversity regularizer:
// activations Q = X W of a linear layer, a trainable linear softmax head on Q,
// and loss L = cross_entropy + beta * d_anchor(Q), minimized by full-batch
// gradient descent.

struct SandboxSpec {
    std::size_t probes = 64;
    std::size_t features = 16;
    std::size_t neurons = 8;
    std::size_t concepts = 12;  // anchors are the concepts
    std::size_t classes = 4;
    std::size_t embedding_dim = 16;
    std::uint64_t seed = 7;
    double step_size = 0.05;
    std::size_t steps = 300;
};

struct SandboxProblem {
    MatrixD features;            // N_probe x m
    MatrixD probe_sims;          // N_probe x |S|
    MatrixD concept_embeddings;  // |S| x d, unit rows
    MatrixD anchor_embeddings;   // |A| x d, unit rows
    std::vector<std::size_t> labels;
    std::size_t classes = 0;
    MatrixD initial_weights;     // m x N_neurons
    double step_size = 0.05;
    std::size_t steps = 0;
};

/// Deterministic synthetic problem for a given spec (seeded).
[[nodiscard]] SandboxProblem make_problem(const SandboxSpec& spec);

struct Parameters {
    MatrixD weights;             // m x N_neurons
    MatrixD head;                // N_neurons x classes
    std::vector<double> bias;    // classes
};

[[nodiscard]] Parameters initial_parameters(const SandboxProblem& prob);

struct TaskTerms {
    double loss = 0.0;
    double accuracy = 0.0;
    MatrixD grad_activations;  // dL_std/dQ
    MatrixD grad_head;
    std::vector<double> grad_bias;
};

[[nodiscard]] MatrixD activations(const SandboxProblem& prob, const Parameters& params);
[[nodiscard]] TaskTerms task_terms(const SandboxProblem& prob, const Parameters& params, const MatrixD& q);

struct JointGradient {
    double task_loss = 0.0;
    double d_anchor = 0.0;
    double accuracy = 0.0;
    MatrixD weights;
    MatrixD head;
    std::vector<double> bias;
};

struct TrainOptions {
    /// Test hook: drop the regularizer's gradient while still reporting d_anchor.
    bool zero_regularizer_gradient = false;
};

/// Gradient of cross_entropy + beta * d_anchor with respect to every parameter.
[[nodiscard]] JointGradient joint_gradient(const SandboxProblem& prob, const Parameters& params,
                                           const diversity::AnchorDistanceObjective& objective, double beta,
                                           const TrainOptions& options = {});

struct TraceRow {
    std::size_t step = 0;
    double task_loss = 0.0;
    double d_anchor = 0.0;
    double accuracy = 0.0;
};

/// Row k holds the metrics after k updates; steps + 1 rows in total.
/// Throws ComputeError naming the step if the loss becomes non-finite.
[[nodiscard]] std::vector<TraceRow> train(const SandboxProblem& prob, const diversity::RegularizerConfig& reg,
                                          const TrainOptions& options = {});

}  // namespace concept_monitor::sandbox
