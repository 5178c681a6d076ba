// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/model.hpp"
#include "a1o/synthdata.hpp"
#include "a1o/rng.hpp"
#include "a1o/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace a1o::test {

/// Uniform values in [lo, hi) whose magnitude is at least `gap`, keeping
/// inputs away from kinks such as PReLU's origin.
inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, double gap = 0.0)
{
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        double v = rng.uniform(lo, hi);
        while (std::abs(v) < gap) v = rng.uniform(lo, hi);
        t[i] = v;
    }
    return t;
}

/// Random values that are pairwise separated by more than `gap`, so max
/// operations have a unique, perturbation-stable winner.
inline Tensor distinct_tensor(Rng& rng, Shape shape, double gap = 1e-3)
{
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        bool ok = false;
        while (!ok) {
            t[i] = rng.uniform(-1.0, 1.0);
            ok = true;
            for (std::size_t j = 0; j < i; ++j)
                if (std::abs(t[i] - t[j]) < gap) ok = false;
        }
    }
    return t;
}

// 16x16 input; extents 8, 8, 4 after the three trunk layers.
inline ModelSpec toy_spec()
{
    ModelSpec s;
    s.input_size = 16;
    s.trunk = {{4, 3, 1, 1, 2}, {6, 3, 1, 1, 0}, {8, 3, 1, 1, 2}};
    s.fusion_taps = {0, 2};
    s.subject_dependent_tap = 2;
    s.reduction_channels = 5;
    s.fused_fc = 10;
    s.identity_conv = {3, 3, 1, 1, 0};
    s.landmarks = 5;
    s.descriptor_dim = 32;
    s.identity_classes = 8;
    for (Task t : {Task::Detection, Task::Landmarks, Task::Visibility, Task::Pose, Task::Smile}) s.heads[t] = {{6}};
    s.heads[Task::Gender] = {{7}};
    s.heads[Task::Age] = {{7}};
    s.heads[Task::Identity] = {{9}};
    return s;
}

// Output layer of a head replaced by a constant.
inline void set_constant_head(Model& m, Task t, const std::vector<double>& value)
{
    const std::string prefix = "heads/" + std::string(task_name(t)) + "/out/";
    auto& w = m.params().mutable_at(prefix + "w");
    std::fill(w.mutable_data().begin(), w.mutable_data().end(), 0.0);
    auto& b = m.params().mutable_at(prefix + "b");
    std::copy(value.begin(), value.end(), b.mutable_data().begin());
}

// Toy model whose detection head always fires (or never does) and whose
// landmarks sit at the canonical template inside the region, frontal and
// visible.
inline Model constant_head_model(bool fire)
{
    Model m = Model::build(toy_spec(), 3);
    set_constant_head(m, Task::Detection, fire ? std::vector<double>{-10, 10} : std::vector<double>{10, -10});
    set_constant_head(m, Task::Landmarks, to_xy(canonical_constellation()));
    set_constant_head(m, Task::Pose, {0, 0, 0});
    set_constant_head(m, Task::Visibility, std::vector<double>(5, 10.0));
    return m;
}

}  // namespace a1o::test
