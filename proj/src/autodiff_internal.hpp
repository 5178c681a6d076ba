// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/graph.hpp"

#include <vector>

namespace a1o::detail {

/// Lazily sized gradient accumulators, one per node.
class GradBuffers {
public:
    GradBuffers(const Graph& graph, std::vector<std::vector<double>>& buffers) : graph_(graph), buffers_(buffers) {}

    std::vector<double>& at(NodeId id)
    {
        auto& b = buffers_[id];
        if (b.empty()) b.assign(graph_.value(id).size(), 0.0);
        return b;
    }

private:
    const Graph& graph_;
    std::vector<std::vector<double>>& buffers_;
};

/// Propagates `gout` (gradient of node `id`'s value) into its inputs.
void backward_node(const Graph& graph, NodeId id, const std::vector<double>& gout, GradBuffers& grads);

/// Loss-op half of the dispatcher, implemented next to the loss kernels.
void backward_loss_node(const Graph& graph, NodeId id, const std::vector<double>& gout, GradBuffers& grads);

}  // namespace a1o::detail
