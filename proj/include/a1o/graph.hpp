// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/tensor.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace a1o {

using NodeId = std::size_t;

enum class OpKind {
    Input,
    Parameter,
    FullyConnected,
    Conv2d,
    MaxPool2d,
    PRelu,
    Softmax,
    Sigmoid,
    Concat,
    Reshape,
    Affine,
    InnerProduct,
    SoftmaxCrossEntropy,
    BinaryCrossEntropy,
    Euclidean,
    AgeLoss,
    WeightedSum,
};

std::string_view op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);

/// One recorded operation on the tape.
///
/// `attr`, `index` and `aux` hold whatever the op needs again on the
/// backward pass (strides, argmax positions, labels, masks, ...).
struct Node {
    OpKind op = OpKind::Input;
    std::vector<NodeId> inputs;
    Tensor value;
    std::array<long, 4> attr{};
    std::vector<std::size_t> index;
    std::vector<double> aux;
    std::vector<double> aux2;
    std::string path;  // parameter nodes only
};

class Graph;

/// Gradients produced by one backward pass.
struct BackwardResult {
    /// Gradient for every parameter node recorded in the graph. Parameters
    /// that do not reach the loss carry an all-zero tensor.
    std::map<std::string, Tensor> parameters;
    /// Per-node gradient buffers, empty where the node did not reach the loss.
    std::vector<std::vector<double>> nodes;

    /// Gradient with respect to a node's value (zeros if unreached).
    Tensor of(const Graph& graph, NodeId id) const;
};

/// Append-only tape of a single forward computation.
///
/// Node ids are append positions, so every input id is smaller than the id
/// of the node that consumes it.
class Graph {
public:
    NodeId input(Tensor value);
    /// Registers a parameter by path; repeated calls with one path return the
    /// same node so uses accumulate into a single gradient.
    NodeId parameter(const std::string& path, const Tensor& value);

    NodeId record(Node node);

    const Node& node(NodeId id) const { return nodes_.at(id); }
    const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
    std::size_t size() const { return nodes_.size(); }
    const std::map<std::string, NodeId>& parameters() const { return parameter_nodes_; }

    /// Reverse pass from a scalar node. Throws ContractError otherwise.
    BackwardResult backward(NodeId loss) const;

private:
    std::vector<Node> nodes_;
    std::map<std::string, NodeId> parameter_nodes_;
};

/// Test hook: perturbs the backward rule of one op kind so gradient checks
/// can be shown to fail. Pass std::nullopt to clear.
void set_gradient_fault(std::optional<OpKind> kind);
std::optional<OpKind> gradient_fault();

}  // namespace a1o
