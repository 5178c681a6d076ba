// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/gradcheck.hpp"
#include "a1o/losses.hpp"
#include "a1o/ops.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace a1o;

TEST(BinaryCrossEntropy, Examples)
{
    EXPECT_NEAR(losses::binary_cross_entropy(0.5, 1).value, std::log(2.0), 1e-12);
    EXPECT_NEAR(losses::binary_cross_entropy(1.0, 1).value, 0.0, 1e-11);
    EXPECT_NEAR(losses::binary_cross_entropy(0.9, 0).value, 2.302585, 1e-6);
    EXPECT_THROW(losses::binary_cross_entropy(0.5, 2), ContractError);
}

TEST(BinaryCrossEntropy, FiniteAtClampedExtremes)
{
    for (double p : {0.0, 1.0})
        for (int y : {0, 1}) {
            const auto l = losses::binary_cross_entropy(p, y);
            EXPECT_TRUE(std::isfinite(l.value));
            EXPECT_TRUE(std::isfinite(l.grad));
            EXPECT_GE(l.value, 0.0);
        }
}

TEST(BinaryCrossEntropy, GradientMatchesCentralDifference)
{
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const double p = rng.uniform(0.05, 0.95);
        const int y = static_cast<int>(rng.below(2));
        const double h = 1e-6;
        const double num = (losses::binary_cross_entropy(p + h, y).value - losses::binary_cross_entropy(p - h, y).value) / (2 * h);
        const double a = losses::binary_cross_entropy(p, y).grad;
        EXPECT_LT(std::abs(a - num) / std::max(1e-12, std::abs(a) + std::abs(num)), 1e-6);
    }
}

TEST(MulticlassCrossEntropy, Examples)
{
    const std::vector<double> four(4, 0.25);
    EXPECT_NEAR(losses::multiclass_cross_entropy(four, 2).value, 1.386294, 1e-6);
    const std::vector<double> onehot{0, 1, 0};
    EXPECT_EQ(losses::multiclass_cross_entropy(onehot, 1).value, 0.0);
    const std::vector<double> wide(10548, 1.0 / 10548);
    EXPECT_NEAR(losses::multiclass_cross_entropy(wide, 17).value, std::log(10548.0), 1e-12);
    EXPECT_NEAR(losses::multiclass_cross_entropy(wide, 17).value, 9.26369, 1e-5);
    EXPECT_THROW(losses::multiclass_cross_entropy(four, 4), ContractError);

    const std::vector<double> p{0.2, 0.5, 0.3};
    EXPECT_EQ(losses::softmax_cross_entropy_logit_grad(p, 1), (std::vector<double>{0.2, -0.5, 0.3}));
    const std::vector<double> zero_p{0.0, 1.0};
    EXPECT_TRUE(std::isfinite(losses::multiclass_cross_entropy(zero_p, 0).value));
}

TEST(Euclidean, Examples)
{
    const std::vector<double> a{1.5, -2.0}, zero{0.0}, two{2.0}, one{1.0}, off{0.0};
    EXPECT_EQ(losses::euclidean(a, a, std::vector<double>{1, 1}).value, 0.0);
    const auto l = losses::euclidean(two, zero, one);
    EXPECT_EQ(l.value, 2.0);
    EXPECT_EQ(l.grad, (std::vector<double>{2.0}));
    const auto masked = losses::euclidean(two, zero, off);
    EXPECT_EQ(masked.value, 0.0);
    EXPECT_EQ(masked.grad, (std::vector<double>{0.0}));
}

TEST(AgeLoss, Examples)
{
    for (double lambda : {0.0, 0.3, 1.0}) EXPECT_EQ(losses::age(41.0, 41.0, 3.0, lambda).value, 0.0);
    EXPECT_NEAR(losses::age(33.0, 30.0, 3.0, 1.0).value, 0.393469, 1e-6);
    EXPECT_LT(std::abs(losses::age(60.0, 30.0, 3.0, 1.0).grad), 1e-9);
    EXPECT_THROW(losses::age(1.0, 0.0, 0.0, 1.0), ContractError);
}

TEST(AgeLoss, SquaredLimitMatchesEuclideanGradient)
{
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        const double y = rng.uniform(-10, 90), a = rng.uniform(0, 80);
        EXPECT_EQ(losses::age(y, a, 3.0, 0.0).grad, y - a);
        const std::vector<double> py{y}, pa{a}, m{1.0};
        EXPECT_EQ(losses::euclidean(py, pa, m).grad[0], y - a);
    }
}

TEST(AgeLoss, GaussianGradientPeaksAtSigma)
{
    const double sigma = 3.0, step = 1e-3;
    double best = 0.0, best_d = 0.0;
    for (double d = 0.0; d <= 40.0; d += step) {
        const double g = std::abs(losses::age(d, 0.0, sigma, 1.0).grad);
        EXPECT_LE(g, 1.0 / (sigma * std::sqrt(std::exp(1.0))) + 1e-15);
        if (g > best) {
            best = g;
            best_d = d;
        }
    }
    EXPECT_NEAR(best_d, sigma, step);
    EXPECT_NEAR(best, 1.0 / (sigma * std::sqrt(std::exp(1.0))), 1e-9);
}

TEST(AgeLoss, GradientMatchesCentralDifference)
{
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const double y = rng.uniform(0, 80), a = rng.uniform(0, 80), lambda = rng.uniform();
        const double sigma = rng.uniform(1, 6), h = 1e-6;
        const double num = (losses::age(y + h, a, sigma, lambda).value - losses::age(y - h, a, sigma, lambda).value) / (2 * h);
        const double an = losses::age(y, a, sigma, lambda).grad;
        EXPECT_LT(std::abs(an - num) / std::max(1e-12, std::abs(an) + std::abs(num)), 1e-6);
        EXPECT_GE(losses::age(y, a, sigma, lambda).value, 0.0);
    }
}

TEST(LambdaSchedule, Examples)
{
    AgeLossParams p;
    EXPECT_EQ(losses::lambda_schedule(0, p), 0.0);
    EXPECT_EQ(losses::lambda_schedule(19999, p), 0.0);
    EXPECT_EQ(losses::lambda_schedule(20000, p), 1.0);
    p.switch_iteration = 0;
    EXPECT_EQ(losses::lambda_schedule(0, p), 1.0);
    p.switch_iteration = 100;
    p.linear_ramp = true;
    EXPECT_EQ(losses::lambda_schedule(25, p), 0.25);
    EXPECT_EQ(losses::lambda_schedule(500, p), 1.0);
}

TEST(TotalLoss, Examples)
{
    const auto one = losses::total({{Task::Gender, 1.7}}, TaskWeights::only(Task::Gender));
    EXPECT_EQ(one.value, 1.7);
    TaskWeights w{};
    w[Task::Age] = 0.5;
    w[Task::Smile] = 1.0;
    const auto two = losses::total({{Task::Age, 2.0}, {Task::Smile, 3.0}}, w);
    EXPECT_EQ(two.value, 4.0);
    EXPECT_EQ(two.partials.at(Task::Age), 0.5);
    const auto iso = losses::total({{Task::Age, 2.0}, {Task::Pose, 3.0}}, TaskWeights::only(Task::Pose, 2.0));
    EXPECT_EQ(iso.value, 6.0);
}

TEST(TaskWeights, Validation)
{
    EXPECT_NO_THROW(TaskWeights::defaults().validate());
    EXPECT_THROW(TaskWeights{}.validate(), ConfigError);
    auto w = TaskWeights::defaults();
    w[Task::Smile] = -1.0;
    EXPECT_THROW(w.validate(), ConfigError);
    const auto d = TaskWeights::defaults();
    EXPECT_GT(d[Task::Landmarks], d[Task::Gender]);
    EXPECT_GT(d[Task::Age], d[Task::Identity]);
}

// Graph-level losses against central differences on random instances.
TEST(GraphLosses, GradientsMatchCentralDifference)
{
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t B = 1 + rng.below(4), C = 2 + rng.below(3);
        std::vector<std::size_t> labels(B);
        std::vector<double> mask(B), bin(B), ages(B), sig(B, 3.0);
        for (std::size_t i = 0; i < B; ++i) {
            labels[i] = rng.below(C);
            mask[i] = rng.below(4) == 0 ? 0.0 : 1.0;
            bin[i] = static_cast<double>(rng.below(2));
            ages[i] = rng.uniform(-4, 4);
        }
        const double lambda = rng.uniform();
        const auto sce = [&](Graph& g, std::span<const NodeId> in) {
            return losses::softmax_cross_entropy(g, in[0], labels, mask);
        };
        EXPECT_LT(grad_check(sce, {test::random_tensor(rng, {B, C}, -3, 3)}).max_relative_error, 1e-5);

        const auto bce = [&](Graph& g, std::span<const NodeId> in) {
            return losses::binary_cross_entropy(g, ops::sigmoid(g, in[0]), bin, mask);
        };
        EXPECT_LT(grad_check(bce, {test::random_tensor(rng, {B, 1}, -3, 3)}).max_relative_error, 1e-5);

        const Tensor target = test::random_tensor(rng, {B, C});
        Tensor emask({B, C});
        for (std::size_t i = 0; i < emask.size(); ++i) emask[i] = rng.below(3) == 0 ? 0.0 : 1.0;
        const auto euc = [&](Graph& g, std::span<const NodeId> in) { return losses::euclidean(g, in[0], target, emask); };
        EXPECT_LT(grad_check(euc, {test::random_tensor(rng, {B, C})}).max_relative_error, 1e-5);

        const auto age = [&](Graph& g, std::span<const NodeId> in) {
            return losses::age(g, in[0], ages, sig, lambda, mask);
        };
        EXPECT_LT(grad_check(age, {test::random_tensor(rng, {B}, -4, 4)}).max_relative_error, 1e-5);

        const double w0 = rng.uniform(0, 2), w1 = rng.uniform(0, 2);
        const auto sum = [&](Graph& g, std::span<const NodeId> in) {
            const NodeId terms[] = {losses::euclidean(g, in[0], target, emask),
                                    losses::softmax_cross_entropy(g, in[1], labels, mask)};
            const double w[] = {w0, w1};
            return losses::weighted_sum(g, terms, w);
        };
        EXPECT_LT(grad_check(sum, {test::random_tensor(rng, {B, C}), test::random_tensor(rng, {B, C}, -3, 3)})
                      .max_relative_error,
                  1e-5);
    }
}

TEST(GraphLosses, MaskedRowsGetExactlyZeroGradient)
{
    Graph g;
    const auto z = g.input(Tensor::matrix({{1, 2}, {3, -1}}));
    const std::size_t labels[] = {0, 1};
    const double mask[] = {1.0, 0.0};
    const auto back = g.backward(losses::softmax_cross_entropy(g, z, labels, mask));
    const auto gz = back.of(g, z);
    EXPECT_EQ(gz[2], 0.0);
    EXPECT_EQ(gz[3], 0.0);
    EXPECT_NE(gz[0], 0.0);
}

TEST(GraphLosses, MatchScalarDefinitions)
{
    Graph g;
    const auto p = g.input(Tensor({2}, {0.5, 0.9}));
    const double labels[] = {1, 0}, mask[] = {1, 1};
    EXPECT_NEAR(g.value(losses::binary_cross_entropy(g, p, labels, mask))[0], std::log(2.0) + std::log(10.0), 1e-12);

    const auto y = g.input(Tensor({1}, {33.0}));
    const double a[] = {30.0}, s[] = {3.0}, m[] = {1.0};
    EXPECT_NEAR(g.value(losses::age(g, y, a, s, 1.0, m))[0], 1.0 - std::exp(-0.5), 1e-12);
}
