// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/geometry.hpp"
#include "a1o/image.hpp"
#include "a1o/task.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace a1o {

/// Ground truth of one sample. `present` says which tasks are labeled.
///
/// A detection label without a box marks a face-free image. Landmarks are in
/// image pixels; pose is (roll, pitch, yaw) in radians.
struct LabelSet {
    TaskSet present;
    std::optional<Box> box;
    std::vector<double> landmarks;
    std::vector<double> visibility;
    std::optional<std::array<double, 3>> pose;
    std::optional<int> gender;
    std::optional<int> smile;
    std::optional<double> age;
    std::optional<double> age_sigma;
    std::optional<int> identity;

    /// Drops every label outside `role` and narrows the presence mask.
    void restrict_to(TaskSet role);
    /// Throws ContractError if the presence mask and the stored values disagree.
    void validate() const;

    friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

struct Sample {
    Image image;
    LabelSet labels;
    std::string domain;
    friend bool operator==(const Sample&, const Sample&) = default;
};

struct SamplePool {
    std::string name;
    TaskSet role;
    std::vector<Sample> samples;
};

}  // namespace a1o
