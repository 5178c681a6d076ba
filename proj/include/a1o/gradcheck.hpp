// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/graph.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace a1o {

/// Records a scalar loss on `g` from the given input nodes.
using GraphBuilder = std::function<NodeId(Graph& g, std::span<const NodeId> inputs)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_element = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares reverse-mode gradients against central differences
/// (f(x + eps) - f(x - eps)) / (2 eps) for every element of every input.
/// Relative error is |a - n| / max(1e-12, |a| + |n|).
GradCheckResult grad_check(const GraphBuilder& builder, const std::vector<Tensor>& inputs, double eps = 1e-6);

struct SuiteRow {
    std::string name;
    int instances = 0;
    double max_relative_error = 0.0;
    bool passed = false;
};

/// Names the suite knows: the ops (fully_connected, conv2d, maxpool2d, prelu,
/// sigmoid, softmax, concat) and the losses (softmax_cross_entropy,
/// binary_cross_entropy, euclidean, age, weighted_sum).
const std::vector<std::string>& suite_names();

/// Checks each named entry (all of them when `scope` is empty) on
/// `instances` random small inputs. Throws ConfigError on an unknown name.
std::vector<SuiteRow> run_gradient_suite(std::span<const std::string> scope, int instances, std::uint64_t seed,
                                         double tolerance = 1e-5);

}  // namespace a1o
