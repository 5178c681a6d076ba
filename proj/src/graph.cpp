// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/graph.hpp"

#include "autodiff_internal.hpp"

#include <array>
#include <atomic>

namespace a1o {

namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 17> kOpNames{{
    {OpKind::Input, "input"},
    {OpKind::Parameter, "parameter"},
    {OpKind::FullyConnected, "fc"},
    {OpKind::Conv2d, "conv2d"},
    {OpKind::MaxPool2d, "maxpool2d"},
    {OpKind::PRelu, "prelu"},
    {OpKind::Softmax, "softmax"},
    {OpKind::Sigmoid, "sigmoid"},
    {OpKind::Concat, "concat"},
    {OpKind::Reshape, "reshape"},
    {OpKind::Affine, "affine"},
    {OpKind::InnerProduct, "inner_product"},
    {OpKind::SoftmaxCrossEntropy, "softmax_cross_entropy"},
    {OpKind::BinaryCrossEntropy, "binary_cross_entropy"},
    {OpKind::Euclidean, "euclidean"},
    {OpKind::AgeLoss, "age_loss"},
    {OpKind::WeightedSum, "weighted_sum"},
}};

std::atomic<int> g_fault{-1};

}  // namespace

std::string_view op_name(OpKind kind)
{
    for (const auto& [k, name] : kOpNames)
        if (k == kind) return name;
    return "unknown";
}

std::optional<OpKind> op_from_name(std::string_view name)
{
    for (const auto& [k, n] : kOpNames)
        if (n == name) return k;
    return std::nullopt;
}

void set_gradient_fault(std::optional<OpKind> kind)
{
    g_fault.store(kind ? static_cast<int>(*kind) : -1);
}

std::optional<OpKind> gradient_fault()
{
    const int v = g_fault.load();
    if (v < 0) return std::nullopt;
    return static_cast<OpKind>(v);
}

Tensor BackwardResult::of(const Graph& graph, NodeId id) const
{
    const auto& shape = graph.value(id).shape();
    if (id >= nodes.size() || nodes[id].empty()) return Tensor::zeros(shape);
    return Tensor(shape, nodes[id]);
}

NodeId Graph::input(Tensor value)
{
    Node n;
    n.op = OpKind::Input;
    n.value = std::move(value);
    return record(std::move(n));
}

NodeId Graph::parameter(const std::string& path, const Tensor& value)
{
    if (auto it = parameter_nodes_.find(path); it != parameter_nodes_.end()) return it->second;
    Node n;
    n.op = OpKind::Parameter;
    n.value = value;
    n.path = path;
    const NodeId id = record(std::move(n));
    parameter_nodes_.emplace(path, id);
    return id;
}

NodeId Graph::record(Node node)
{
    const NodeId id = nodes_.size();
    for (auto in : node.inputs)
        if (in >= id) throw ContractError("graph input id must precede the node consuming it");
    nodes_.push_back(std::move(node));
    return id;
}

BackwardResult Graph::backward(NodeId loss) const
{
    if (loss >= nodes_.size()) throw ContractError("backward: unknown loss node");
    if (nodes_[loss].value.size() != 1)
        throw ContractError("backward: loss must be scalar, got shape " + shape_to_string(nodes_[loss].value.shape()));

    BackwardResult result;
    result.nodes.resize(nodes_.size());
    detail::GradBuffers grads(*this, result.nodes);
    grads.at(loss)[0] = 1.0;

    const auto fault = gradient_fault();
    for (NodeId id = loss + 1; id-- > 0;) {
        const auto& gout = result.nodes[id];
        if (gout.empty()) continue;
        const OpKind op = nodes_[id].op;
        if (op == OpKind::Input || op == OpKind::Parameter) continue;
        if (fault && *fault == op) {
            std::vector<double> perturbed = gout;
            for (auto& v : perturbed) v *= 1.01;
            detail::backward_node(*this, id, perturbed, grads);
        } else {
            detail::backward_node(*this, id, gout, grads);
        }
    }

    for (const auto& [path, id] : parameter_nodes_) result.parameters.emplace(path, result.of(*this, id));
    return result;
}

}  // namespace a1o
