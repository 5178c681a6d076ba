// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/gradcheck.hpp"
#include "a1o/errors.hpp"
#include "a1o/losses.hpp"
#include "a1o/ops.hpp"
#include "a1o/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace a1o {

namespace {

double evaluate(const GraphBuilder& builder, const std::vector<Tensor>& inputs, Graph* keep = nullptr,
                std::vector<NodeId>* ids = nullptr, NodeId* loss_out = nullptr)
{
    Graph local;
    Graph& g = keep ? *keep : local;
    std::vector<NodeId> input_ids;
    input_ids.reserve(inputs.size());
    for (const auto& t : inputs) input_ids.push_back(g.input(t));
    const NodeId loss = builder(g, input_ids);
    if (g.value(loss).size() != 1) throw ContractError("grad_check: builder must produce a scalar loss");
    const double v = g.value(loss)[0];
    if (!std::isfinite(v)) throw ContractError("grad_check: non-finite loss");
    if (ids) *ids = std::move(input_ids);
    if (loss_out) *loss_out = loss;
    return v;
}

}  // namespace

GradCheckResult grad_check(const GraphBuilder& builder, const std::vector<Tensor>& inputs, double eps)
{
    if (!(eps > 0.0)) throw ContractError("grad_check: eps must be positive");
    Graph g;
    std::vector<NodeId> ids;
    NodeId loss = 0;
    evaluate(builder, inputs, &g, &ids, &loss);
    const BackwardResult back = g.backward(loss);

    GradCheckResult result;
    std::vector<Tensor> probe = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor analytic = back.of(g, ids[i]);
        for (std::size_t e = 0; e < inputs[i].size(); ++e) {
            const double x0 = inputs[i][e];
            probe[i][e] = x0 + eps;
            const double fp = evaluate(builder, probe);
            probe[i][e] = x0 - eps;
            const double fm = evaluate(builder, probe);
            probe[i][e] = x0;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[e];
            const double err = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
            if (err > result.max_relative_error) result = {err, i, e, a, numeric};
        }
    }
    return result;
}

namespace {

Tensor uniform_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, double gap = 0.0)
{
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        double v = rng.uniform(lo, hi);
        while (std::abs(v) < gap) v = rng.uniform(lo, hi);
        t[i] = v;
    }
    return t;
}

// Pairwise separated values so every pooling window has a stable winner.
Tensor separated_tensor(Rng& rng, Shape shape)
{
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = -1.0 + 2.0 * (static_cast<double>(i) + rng.uniform(0.2, 0.8)) / static_cast<double>(t.size());
    for (std::size_t i = t.size(); i > 1; --i) std::swap(t[i - 1], t[rng.below(i)]);
    return t;
}

// Projects a node onto fixed random weights to get a scalar.
NodeId project(Graph& g, NodeId y, std::uint64_t seed)
{
    Rng wr(seed);
    return ops::inner_product(g, y, uniform_tensor(wr, g.value(y).shape()));
}

using Instance = std::function<double(Rng&)>;

std::size_t extent(Rng& rng, std::size_t max = 4) { return 1 + rng.below(max); }

std::vector<std::size_t> labels_below(Rng& rng, std::size_t n, std::size_t classes)
{
    std::vector<std::size_t> out(n);
    for (auto& l : out) l = rng.below(classes);
    return out;
}

std::vector<double> row_mask(Rng& rng, std::size_t n)
{
    std::vector<double> out(n);
    for (auto& m : out) m = rng.below(4) == 0 ? 0.0 : 1.0;
    return out;
}

const std::map<std::string, Instance>& instances()
{
    static const std::map<std::string, Instance> table{
        {"fully_connected",
         [](Rng& rng) {
             const std::size_t B = extent(rng), I = extent(rng), O = extent(rng);
             const auto s = rng.below(1u << 30);
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return project(g, ops::fully_connected(g, in[0], in[1], in[2]), s); },
                               {uniform_tensor(rng, {B, I}), uniform_tensor(rng, {O, I}), uniform_tensor(rng, {O})})
                 .max_relative_error;
         }},
        {"conv2d",
         [](Rng& rng) {
             const std::size_t B = extent(rng, 2), C = extent(rng, 3), O = extent(rng, 3), H = 2 + rng.below(3), W = 2 + rng.below(3),
                               K = 1 + rng.below(2);
             const int stride = 1 + static_cast<int>(rng.below(2)), pad = static_cast<int>(rng.below(2));
             const auto s = rng.below(1u << 30);
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return project(g, ops::conv2d(g, in[0], in[1], in[2], stride, pad), s); },
                               {uniform_tensor(rng, {B, C, H, W}), uniform_tensor(rng, {O, C, K, K}), uniform_tensor(rng, {O})})
                 .max_relative_error;
         }},
        {"maxpool2d",
         [](Rng& rng) {
             const std::size_t B = extent(rng, 2), C = extent(rng, 3), H = 2 + rng.below(4), W = 2 + rng.below(4);
             const int window = 2, stride = 1 + static_cast<int>(rng.below(2));
             const auto s = rng.below(1u << 30);
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return project(g, ops::maxpool2d(g, in[0], window, stride), s); },
                               {separated_tensor(rng, {B, C, H, W})})
                 .max_relative_error;
         }},
        {"prelu",
         [](Rng& rng) {
             const std::size_t B = extent(rng), C = extent(rng), H = extent(rng);
             const auto s = rng.below(1u << 30);
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return project(g, ops::prelu(g, in[0], in[1]), s); },
                               {uniform_tensor(rng, {B, C, H}, -1, 1, 1e-3), uniform_tensor(rng, {C})})
                 .max_relative_error;
         }},
        {"sigmoid",
         [](Rng& rng) {
             const std::size_t B = extent(rng), C = extent(rng);
             const auto s = rng.below(1u << 30);
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return project(g, ops::sigmoid(g, in[0]), s); },
                               {uniform_tensor(rng, {B, C}, -4, 4)})
                 .max_relative_error;
         }},
        {"softmax",
         [](Rng& rng) {
             const std::size_t B = extent(rng), C = 1 + extent(rng);
             const auto s = rng.below(1u << 30);
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return project(g, ops::softmax(g, in[0]), s); },
                               {uniform_tensor(rng, {B, C}, -3, 3)})
                 .max_relative_error;
         }},
        {"concat",
         [](Rng& rng) {
             const std::size_t B = extent(rng), I = extent(rng), O = extent(rng), W = extent(rng);
             const auto s = rng.below(1u << 30);
             return grad_check(
                        [&](Graph& g, std::span<const NodeId> in) {
                            const NodeId parts[] = {in[0], in[1]};
                            return project(g, ops::concat(g, parts, 1), s);
                        },
                        {uniform_tensor(rng, {B, I, W}), uniform_tensor(rng, {B, O, W})})
                 .max_relative_error;
         }},
        {"softmax_cross_entropy",
         [](Rng& rng) {
             const std::size_t B = extent(rng), C = 1 + extent(rng);
             const auto labels = labels_below(rng, B, C);
             const auto mask = row_mask(rng, B);
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return losses::softmax_cross_entropy(g, in[0], labels, mask); },
                               {uniform_tensor(rng, {B, C}, -3, 3)})
                 .max_relative_error;
         }},
        {"binary_cross_entropy",
         [](Rng& rng) {
             const std::size_t B = extent(rng);
             std::vector<double> labels(B);
             for (auto& l : labels) l = static_cast<double>(rng.below(2));
             const auto mask = row_mask(rng, B);
             return grad_check(
                        [&](Graph& g, std::span<const NodeId> in) { return losses::binary_cross_entropy(g, ops::sigmoid(g, in[0]), labels, mask); },
                        {uniform_tensor(rng, {B, 1}, -3, 3)})
                 .max_relative_error;
         }},
        {"euclidean",
         [](Rng& rng) {
             const std::size_t B = extent(rng), C = extent(rng);
             const Tensor target = uniform_tensor(rng, {B, C});
             Tensor mask({B, C});
             for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.below(3) == 0 ? 0.0 : 1.0;
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return losses::euclidean(g, in[0], target, mask); },
                               {uniform_tensor(rng, {B, C})})
                 .max_relative_error;
         }},
        {"age",
         [](Rng& rng) {
             const std::size_t B = extent(rng);
             std::vector<double> target(B), sigma(B);
             for (std::size_t i = 0; i < B; ++i) {
                 target[i] = rng.uniform(-4, 4);
                 sigma[i] = rng.uniform(1, 4);
             }
             const double lambda = rng.uniform();
             const auto mask = row_mask(rng, B);
             return grad_check([&](Graph& g, std::span<const NodeId> in) { return losses::age(g, in[0], target, sigma, lambda, mask); },
                               {uniform_tensor(rng, {B}, -4, 4)})
                 .max_relative_error;
         }},
        {"weighted_sum",
         [](Rng& rng) {
             const std::size_t B = extent(rng), C = 1 + extent(rng);
             const Tensor target = uniform_tensor(rng, {B, C});
             const Tensor ones = Tensor::filled({B, C}, 1.0);
             const auto labels = labels_below(rng, B, C);
             const auto mask = row_mask(rng, B);
             const double w[] = {rng.uniform(0, 5), rng.uniform(0, 5)};
             return grad_check(
                        [&](Graph& g, std::span<const NodeId> in) {
                            const NodeId terms[] = {losses::euclidean(g, in[0], target, ones),
                                                    losses::softmax_cross_entropy(g, in[1], labels, mask)};
                            return losses::weighted_sum(g, terms, w);
                        },
                        {uniform_tensor(rng, {B, C}), uniform_tensor(rng, {B, C}, -3, 3)})
                 .max_relative_error;
         }},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& suite_names()
{
    static const std::vector<std::string> names{"fully_connected",       "conv2d",               "maxpool2d", "prelu", "sigmoid", "softmax",
                                                "concat",                "softmax_cross_entropy", "binary_cross_entropy",
                                                "euclidean",             "age",                  "weighted_sum"};
    return names;
}

std::vector<SuiteRow> run_gradient_suite(std::span<const std::string> scope, int instances_per_entry, std::uint64_t seed,
                                         double tolerance)
{
    if (instances_per_entry < 1) throw ConfigError("gradient suite: instances must be positive");
    std::vector<std::string> names(scope.begin(), scope.end());
    if (names.empty()) names = suite_names();
    std::vector<SuiteRow> rows;
    for (const auto& name : names) {
        const auto it = instances().find(name);
        if (it == instances().end()) throw ConfigError("gradient suite: unknown entry '" + name + "'");
        Rng rng(seed);
        SuiteRow row{name, instances_per_entry, 0.0, true};
        for (int i = 0; i < instances_per_entry; ++i) row.max_relative_error = std::max(row.max_relative_error, it->second(rng));
        row.passed = row.max_relative_error < tolerance;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace a1o
