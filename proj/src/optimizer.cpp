// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/optimizer.hpp"

#include <cmath>

namespace a1o {

Sgd::Sgd(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum)
{
    if (!(learning_rate > 0.0)) throw ContractError("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("momentum must lie in [0, 1)");
}

void Sgd::step(ParamStore& params, const GradientMap& grads)
{
    for (const auto& [path, g] : grads) {
        const Tensor& p = params.at(path);
        if (g.size() != p.size())
            throw DimensionError("gradient for '" + path + "' has shape " + shape_to_string(g.shape()) +
                                 ", parameter has " + shape_to_string(p.shape()));
        for (auto v : g.data())
            if (!std::isfinite(v)) throw NonFiniteGradient(path);
    }
    for (const auto& [path, g] : grads) {
        auto& v = velocity_[path];
        if (v.empty()) v.assign(g.size(), 0.0);
        auto p = params.mutable_at(path).mutable_data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = momentum_ * v[i] + g[i];
            p[i] -= lr_ * v[i];
        }
    }
}

}  // namespace a1o
