// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/graph.hpp"
#include "a1o/param_store.hpp"
#include "a1o/task.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace a1o {

/// Convolution + PReLU, optionally followed by a square max-pool.
struct ConvLayerSpec {
    int channels = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 0;
    int pool = 0;  // window and stride of the trailing pool; 0 disables it
};

struct HeadSpec {
    std::vector<int> hidden;  // fc + PReLU widths before the output layer
};

/// Declarative description of the branched network.
///
/// The trunk is a chain of conv layers. Subject-independent tasks read the
/// fusion of the trunk outputs listed in `fusion_taps`; gender and age read
/// the trunk output at `subject_dependent_tap`, and identity passes that
/// output through one more unshared conv layer first.
struct ModelSpec {
    int input_channels = 1;
    int input_size = 32;
    std::vector<ConvLayerSpec> trunk;
    std::vector<int> fusion_taps;
    int subject_dependent_tap = 0;
    int reduction_channels = 16;
    int fused_fc = 64;
    ConvLayerSpec identity_conv{24, 3, 1, 1, 0};
    int landmarks = 5;  // K
    int descriptor_dim = 32;
    int identity_classes = 8;
    double age_offset = 40.0;
    double age_scale = 20.0;
    std::map<Task, HeadSpec> heads;

    TaskSet tasks() const;
    /// Output width of a task head.
    std::size_t arity(Task t) const;
    /// Throws ConfigError naming the first violated rule.
    void validate() const;

    static ModelSpec desk_default();
    static ModelSpec from_json(const nlohmann::json& j);
    static ModelSpec load(const std::filesystem::path& file);
    nlohmann::json to_json() const;
};

/// Spatial extent after each trunk layer (post-pool).
std::vector<int> trunk_extents(const ModelSpec& spec);

/// Per-row outputs of one forward pass. Only the requested tasks are filled.
struct TaskOutputs {
    TaskSet present;
    std::array<double, 2> detection{};  // (non-face, face) probabilities
    std::vector<double> landmarks;      // x0, y0, x1, y1, ... in region units
    std::vector<double> visibility;
    std::array<double, 3> pose{};  // roll, pitch, yaw in radians
    double gender = 0.0;
    double smile = 0.0;
    double age = 0.0;
    std::vector<double> identity_logits;
    std::vector<double> descriptor;
};

/// Graph handles produced by Model::forward.
struct ModelNodes {
    /// detection and identity: logits; gender, smile, visibility:
    /// probabilities; landmarks, pose, age: values.
    std::map<Task, NodeId> head;
    std::optional<NodeId> detection_prob;
    std::optional<NodeId> descriptor;
};

struct ForwardOptions {
    /// Replace the features of this trunk layer with zeros on the fusion
    /// path only (the trunk spine is untouched).
    std::optional<int> ablate_tap;
};

inline constexpr TaskSet kRegionTasks{Task::Detection, Task::Landmarks, Task::Visibility, Task::Pose, Task::Smile};
inline constexpr TaskSet kAlignedTasks{Task::Gender, Task::Age, Task::Identity};

class Model {
public:
    Model() = default;
    static Model build(const ModelSpec& spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    const ParamStore& params() const { return params_; }
    ParamStore& params() { return params_; }
    std::size_t parameter_count() const { return params_.parameter_count(); }

    /// Records the sub-network needed for `tasks` on an input node of shape
    /// [B, C, S, S].
    ModelNodes forward(Graph& g, NodeId input, TaskSet tasks, const ForwardOptions& opt = {}) const;

    std::vector<TaskOutputs> infer(const Tensor& batch, TaskSet tasks, const ForwardOptions& opt = {}) const;
    std::vector<TaskOutputs> forward_region(const Tensor& batch) const { return infer(batch, kRegionTasks); }
    std::vector<TaskOutputs> forward_aligned(const Tensor& batch) const { return infer(batch, kAlignedTasks); }

    /// Which tasks can reach each parameter.
    const std::map<std::string, TaskSet>& sharing_report() const { return params_.sharing(); }

    /// Replaces parameter values from a checkpoint map; every model path
    /// must be present with a matching shape. Extra entries are ignored.
    void load_parameters(const std::map<std::string, Tensor>& tensors);

private:
    NodeId param(Graph& g, const std::string& path) const { return g.parameter(path, params_.at(path)); }
    NodeId conv_block(Graph& g, NodeId x, const std::string& prefix, const ConvLayerSpec& layer) const;
    NodeId fc_block(Graph& g, NodeId x, const std::string& prefix, bool activate) const;

    ModelSpec spec_;
    ParamStore params_;
};

}  // namespace a1o
