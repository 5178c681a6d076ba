// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/param_store.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace a1o {

class NonFiniteGradient : public std::runtime_error {
public:
    explicit NonFiniteGradient(std::string path)
        : std::runtime_error("non-finite gradient for parameter '" + path + "'"), path_(std::move(path))
    {
    }
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Momentum SGD: v <- momentum * v + g; p <- p - lr * v.
class Sgd {
public:
    Sgd(double learning_rate, double momentum);

    /// Applies one update. Paths absent from `grads` are left untouched. The
    /// whole step is rejected (nothing modified) if any gradient is
    /// non-finite or names an unknown parameter.
    void step(ParamStore& params, const GradientMap& grads);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    double momentum() const { return momentum_; }

    const std::map<std::string, std::vector<double>>& velocity() const { return velocity_; }
    void set_velocity(const std::string& path, std::vector<double> v) { velocity_[path] = std::move(v); }

private:
    double lr_;
    double momentum_;
    std::map<std::string, std::vector<double>> velocity_;
};

}  // namespace a1o
