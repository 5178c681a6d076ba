// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/graph.hpp"
#include "a1o/task.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace a1o {

/// Mixing between the squared and Gaussian age losses.
struct AgeLossParams {
    double lambda = 0.0;
    /// Annotation standard deviation used when a sample carries none.
    double sigma = 3.0;
    std::uint64_t switch_iteration = 20000;
    /// Ramp lambda linearly from 0 at iteration 0 to 1 at switch_iteration
    /// instead of switching in one step.
    bool linear_ramp = false;
};

/// Per-task multipliers of the weighted total loss.
struct TaskWeights {
    std::array<double, 8> values{};

    double operator[](Task t) const { return values[static_cast<std::size_t>(t)]; }
    double& operator[](Task t) { return values[static_cast<std::size_t>(t)]; }

    /// Regression tasks weighted above classification tasks.
    static TaskWeights defaults();
    static TaskWeights only(Task t, double weight = 1.0);
    /// Throws ConfigError if any weight is negative or all are zero.
    void validate() const;
};

struct ScalarLoss {
    double value = 0.0;
    double grad = 0.0;
};

struct VectorLoss {
    double value = 0.0;
    std::vector<double> grad;
};

namespace losses {

inline constexpr double kProbabilityClamp = 1e-12;

/// -(1 - y) log(1 - p) - y log(p) with p clamped to [eps, 1 - eps]; grad is
/// dL/dp evaluated at the clamped probability.
ScalarLoss binary_cross_entropy(double p, int label);

/// -log p[label]; grad is dL/dp.
VectorLoss multiclass_cross_entropy(std::span<const double> p, std::size_t label);

/// Gradient of -log softmax(z)[label] with respect to z, given p = softmax(z).
std::vector<double> softmax_cross_entropy_logit_grad(std::span<const double> p, std::size_t label);

/// 0.5 * sum mask_i (pred_i - target_i)^2; grad is dL/dpred.
VectorLoss euclidean(std::span<const double> pred, std::span<const double> target, std::span<const double> mask);

/// (1 - lambda) * 0.5 (y - a)^2 + lambda * (1 - exp(-(y - a)^2 / (2 sigma^2))); grad is dL/dy.
ScalarLoss age(double y, double a, double sigma, double lambda);
inline ScalarLoss age(double y, double a, const AgeLossParams& p) { return age(y, a, p.sigma, p.lambda); }

/// 0 before the switch iteration, 1 from it on (or the linear ramp).
double lambda_schedule(std::uint64_t iteration, const AgeLossParams& params);

struct TotalLoss {
    double value = 0.0;
    std::map<Task, double> partials;  // dL/dL_t
};

/// Weighted sum over the tasks present in `per_task`.
TotalLoss total(const std::map<Task, double>& per_task, const TaskWeights& weights);

// Graph versions. Row masks select which batch rows contribute; a zero mask
// row gets exactly zero gradient.

/// Softmax over logits [B, C] followed by -log p[label] per masked row, summed.
NodeId softmax_cross_entropy(Graph& g, NodeId logits, std::span<const std::size_t> labels, std::span<const double> mask);

/// Binary cross-entropy on probabilities [B] or [B, 1], summed over masked rows.
NodeId binary_cross_entropy(Graph& g, NodeId prob, std::span<const double> labels, std::span<const double> mask);

/// Element-masked squared error; target and mask share pred's element count.
NodeId euclidean(Graph& g, NodeId pred, const Tensor& target, const Tensor& mask);

/// Age loss per row of pred [B] or [B, 1], summed over masked rows.
NodeId age(Graph& g, NodeId pred, std::span<const double> target, std::span<const double> sigma, double lambda,
           std::span<const double> mask);

/// sum_i weights[i] * terms[i] over scalar terms.
NodeId weighted_sum(Graph& g, std::span<const NodeId> terms, std::span<const double> weights);

}  // namespace losses
}  // namespace a1o
