// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/losses.hpp"

#include "autodiff_internal.hpp"

#include <algorithm>
#include <cmath>

namespace a1o {

TaskWeights TaskWeights::defaults()
{
    TaskWeights w;
    w[Task::Detection] = 1.0;
    w[Task::Landmarks] = 5.0;
    w[Task::Visibility] = 2.0;
    w[Task::Pose] = 5.0;
    w[Task::Gender] = 1.0;
    w[Task::Smile] = 1.0;
    w[Task::Age] = 3.0;
    w[Task::Identity] = 1.0;
    return w;
}

TaskWeights TaskWeights::only(Task t, double weight)
{
    TaskWeights w;
    w[t] = weight;
    return w;
}

void TaskWeights::validate() const
{
    bool positive = false;
    for (auto t : kAllTasks) {
        const double v = (*this)[t];
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError("task weight for " + std::string(task_name(t)) + " must be a non-negative number");
        positive = positive || v > 0.0;
    }
    if (!positive) throw ConfigError("at least one task weight must be positive");
}

namespace losses {

namespace {

double clamp_probability(double p)
{
    return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

void check_binary_label(double y)
{
    if (y != 0.0 && y != 1.0) throw ContractError("binary label must be 0 or 1, got " + std::to_string(y));
}

}  // namespace

ScalarLoss binary_cross_entropy(double p, int label)
{
    check_binary_label(label);
    const double q = clamp_probability(p);
    const double y = label;
    return {-(1.0 - y) * std::log(1.0 - q) - y * std::log(q), (1.0 - y) / (1.0 - q) - y / q};
}

VectorLoss multiclass_cross_entropy(std::span<const double> p, std::size_t label)
{
    if (label >= p.size())
        throw ContractError("class label " + std::to_string(label) + " out of range for " + std::to_string(p.size()) + " classes");
    double sum = 0.0;
    for (auto v : p) sum += v;
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("probability row must sum to 1");
    VectorLoss out;
    const double q = std::max(p[label], kProbabilityClamp);
    out.value = -std::log(q);
    out.grad.assign(p.size(), 0.0);
    out.grad[label] = -1.0 / q;
    return out;
}

std::vector<double> softmax_cross_entropy_logit_grad(std::span<const double> p, std::size_t label)
{
    if (label >= p.size()) throw ContractError("class label out of range");
    std::vector<double> g(p.begin(), p.end());
    g[label] -= 1.0;
    return g;
}

VectorLoss euclidean(std::span<const double> pred, std::span<const double> target, std::span<const double> mask)
{
    if (pred.size() != target.size() || pred.size() != mask.size())
        throw DimensionError("euclidean: pred, target and mask must have equal extents");
    VectorLoss out;
    out.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        out.value += 0.5 * mask[i] * d * d;
        out.grad[i] = mask[i] * d;
    }
    return out;
}

ScalarLoss age(double y, double a, double sigma, double lambda)
{
    if (!(sigma > 0.0)) throw ContractError("age loss sigma must be positive");
    const double d = y - a;
    const double s2 = sigma * sigma;
    const double gauss = std::exp(-d * d / (2.0 * s2));
    return {(1.0 - lambda) * 0.5 * d * d + lambda * (1.0 - gauss), (1.0 - lambda) * d + lambda * (d / s2) * gauss};
}

double lambda_schedule(std::uint64_t iteration, const AgeLossParams& params)
{
    if (iteration >= params.switch_iteration) return 1.0;
    if (params.linear_ramp) return static_cast<double>(iteration) / static_cast<double>(params.switch_iteration);
    return 0.0;
}

TotalLoss total(const std::map<Task, double>& per_task, const TaskWeights& weights)
{
    TotalLoss out;
    for (const auto& [task, loss] : per_task) {
        const double w = weights[task];
        if (!std::isfinite(w)) throw ConfigError("missing weight for task " + std::string(task_name(task)));
        out.value += w * loss;
        out.partials[task] = w;
    }
    return out;
}

namespace {

std::size_t rows_of(const Tensor& v, const char* op)
{
    if (v.rank() == 1) return v.extent(0);
    if (v.rank() == 2 && v.extent(1) == 1) return v.extent(0);
    throw DimensionError(std::string(op) + ": expected [B] or [B,1], got " + shape_to_string(v.shape()));
}

void check_mask(std::span<const double> mask, std::size_t rows, const char* op)
{
    if (mask.size() != rows)
        throw DimensionError(std::string(op) + ": mask has " + std::to_string(mask.size()) + " rows, input has " +
                             std::to_string(rows));
}

}  // namespace

NodeId softmax_cross_entropy(Graph& g, NodeId logits, std::span<const std::size_t> labels, std::span<const double> mask)
{
    const Tensor& z = g.value(logits);
    if (z.rank() != 2) throw DimensionError("softmax_cross_entropy: expected [batch, classes], got " + shape_to_string(z.shape()));
    const std::size_t B = z.extent(0), C = z.extent(1);
    check_mask(mask, B, "softmax_cross_entropy");
    if (labels.size() != B) throw DimensionError("softmax_cross_entropy: label count mismatch");
    Node n;
    n.op = OpKind::SoftmaxCrossEntropy;
    n.inputs = {logits};
    n.aux.resize(B * C);
    n.aux2.assign(mask.begin(), mask.end());
    n.index.assign(labels.begin(), labels.end());
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const double* r = z.data().data() + i * C;
        const double m = *std::max_element(r, r + C);
        double s = 0.0;
        for (std::size_t j = 0; j < C; ++j) s += std::exp(r[j] - m);
        for (std::size_t j = 0; j < C; ++j) n.aux[i * C + j] = std::exp(r[j] - m) / s;
        if (mask[i] == 0.0) continue;
        if (labels[i] >= C) throw ContractError("softmax_cross_entropy: label out of range");
        // log-sum-exp form stays finite even when p[label] underflows
        total += mask[i] * (std::log(s) + m - r[labels[i]]);
    }
    n.value = Tensor::scalar(total);
    return g.record(std::move(n));
}

NodeId binary_cross_entropy(Graph& g, NodeId prob, std::span<const double> labels, std::span<const double> mask)
{
    const Tensor& p = g.value(prob);
    const std::size_t B = rows_of(p, "binary_cross_entropy");
    check_mask(mask, B, "binary_cross_entropy");
    if (labels.size() != B) throw DimensionError("binary_cross_entropy: label count mismatch");
    Node n;
    n.op = OpKind::BinaryCrossEntropy;
    n.inputs = {prob};
    n.aux.assign(labels.begin(), labels.end());
    n.aux2.assign(mask.begin(), mask.end());
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        if (mask[i] == 0.0) continue;
        check_binary_label(labels[i]);
        total += mask[i] * binary_cross_entropy(p[i], static_cast<int>(labels[i])).value;
    }
    n.value = Tensor::scalar(total);
    return g.record(std::move(n));
}

NodeId euclidean(Graph& g, NodeId pred, const Tensor& target, const Tensor& mask)
{
    const Tensor& p = g.value(pred);
    if (p.size() != target.size() || p.size() != mask.size())
        throw DimensionError("euclidean: shapes " + shape_to_string(p.shape()) + ", " + shape_to_string(target.shape()) +
                             " and " + shape_to_string(mask.shape()) + " differ in size");
    Node n;
    n.op = OpKind::Euclidean;
    n.inputs = {pred};
    n.aux = target.values();
    n.aux2 = mask.values();
    n.value = Tensor::scalar(euclidean(p.data(), target.data(), mask.data()).value);
    return g.record(std::move(n));
}

NodeId age(Graph& g, NodeId pred, std::span<const double> target, std::span<const double> sigma, double lambda,
           std::span<const double> mask)
{
    const Tensor& y = g.value(pred);
    const std::size_t B = rows_of(y, "age");
    check_mask(mask, B, "age");
    if (target.size() != B || sigma.size() != B) throw DimensionError("age: target/sigma count mismatch");
    Node n;
    n.op = OpKind::AgeLoss;
    n.inputs = {pred};
    n.aux.reserve(2 * B);
    n.aux.insert(n.aux.end(), target.begin(), target.end());
    n.aux.insert(n.aux.end(), sigma.begin(), sigma.end());
    n.aux2.assign(mask.begin(), mask.end());
    n.aux2.push_back(lambda);
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i)
        if (mask[i] != 0.0) total += mask[i] * age(y[i], target[i], sigma[i], lambda).value;
    n.value = Tensor::scalar(total);
    return g.record(std::move(n));
}

NodeId weighted_sum(Graph& g, std::span<const NodeId> terms, std::span<const double> weights)
{
    if (terms.size() != weights.size()) throw DimensionError("weighted_sum: term/weight count mismatch");
    if (terms.empty()) throw DimensionError("weighted_sum: no terms");
    Node n;
    n.op = OpKind::WeightedSum;
    n.inputs.assign(terms.begin(), terms.end());
    n.aux.assign(weights.begin(), weights.end());
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (g.value(terms[i]).size() != 1) throw DimensionError("weighted_sum: terms must be scalar");
        total += weights[i] * g.value(terms[i])[0];
    }
    n.value = Tensor::scalar(total);
    return g.record(std::move(n));
}

}  // namespace losses

namespace detail {

void backward_loss_node(const Graph& graph, NodeId id, const std::vector<double>& gout, GradBuffers& grads)
{
    const Node& n = graph.node(id);
    const double up = gout[0];
    switch (n.op) {
    case OpKind::SoftmaxCrossEntropy: {
        auto& gz = grads.at(n.inputs[0]);
        const std::size_t B = n.aux2.size();
        const std::size_t C = n.aux.size() / B;
        for (std::size_t i = 0; i < B; ++i) {
            const double m = n.aux2[i];
            if (m == 0.0) continue;
            for (std::size_t j = 0; j < C; ++j) {
                const double onehot = j == n.index[i] ? 1.0 : 0.0;
                gz[i * C + j] += up * m * (n.aux[i * C + j] - onehot);
            }
        }
        return;
    }
    case OpKind::BinaryCrossEntropy: {
        const Tensor& p = graph.value(n.inputs[0]);
        auto& gp = grads.at(n.inputs[0]);
        for (std::size_t i = 0; i < n.aux2.size(); ++i) {
            const double m = n.aux2[i];
            if (m == 0.0) continue;
            gp[i] += up * m * losses::binary_cross_entropy(p[i], static_cast<int>(n.aux[i])).grad;
        }
        return;
    }
    case OpKind::Euclidean: {
        const Tensor& p = graph.value(n.inputs[0]);
        auto& gp = grads.at(n.inputs[0]);
        for (std::size_t i = 0; i < p.size(); ++i) gp[i] += up * n.aux2[i] * (p[i] - n.aux[i]);
        return;
    }
    case OpKind::AgeLoss: {
        const Tensor& y = graph.value(n.inputs[0]);
        auto& gy = grads.at(n.inputs[0]);
        const std::size_t B = n.aux2.size() - 1;
        const double lambda = n.aux2[B];
        for (std::size_t i = 0; i < B; ++i) {
            const double m = n.aux2[i];
            if (m == 0.0) continue;
            gy[i] += up * m * losses::age(y[i], n.aux[i], n.aux[B + i], lambda).grad;
        }
        return;
    }
    case OpKind::WeightedSum: {
        for (std::size_t i = 0; i < n.inputs.size(); ++i)
            if (n.aux[i] != 0.0) grads.at(n.inputs[i])[0] += up * n.aux[i];
        return;
    }
    default:
        throw ContractError("backward: unsupported op " + std::string(op_name(n.op)));
    }
}

}  // namespace detail
}  // namespace a1o
