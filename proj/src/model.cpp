// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/model.hpp"

#include "a1o/ops.hpp"
#include "a1o/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace a1o {

namespace {

constexpr double kInitialSlope = 0.25;

int conv_extent(int e, const ConvLayerSpec& l)
{
    const int padded = e + 2 * l.pad;
    if (padded < l.kernel) return 0;
    e = (padded - l.kernel) / l.stride + 1;
    if (l.pool > 0) e = e < l.pool ? 0 : (e - l.pool) / l.pool + 1;
    return e;
}

bool needs_fusion(TaskSet tasks) { return !(tasks & kRegionTasks).empty(); }
bool needs_spine(TaskSet tasks) { return !(tasks & kAlignedTasks).empty(); }

// Kernel (= stride) of the conv that brings a tap down to the fused extent,
// or 0 when the extents already agree.
int adapter_kernel(int extent, int target)
{
    if (extent == target) return 0;
    const int k = extent / target;
    if (k < 2 || extent / k != target) return -1;
    return k;
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end())
            throw ConfigError(where + ": unknown field '" + key + "'");
    }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

ConvLayerSpec conv_from_json(const nlohmann::json& j, const std::string& where)
{
    reject_unknown(j, {"channels", "kernel", "stride", "pad", "pool"}, where);
    ConvLayerSpec l;
    read_field(j, "channels", l.channels, where);
    read_field(j, "kernel", l.kernel, where);
    read_field(j, "stride", l.stride, where);
    read_field(j, "pad", l.pad, where);
    read_field(j, "pool", l.pool, where);
    return l;
}

nlohmann::json conv_to_json(const ConvLayerSpec& l)
{
    return {{"channels", l.channels}, {"kernel", l.kernel}, {"stride", l.stride}, {"pad", l.pad}, {"pool", l.pool}};
}

void check_conv(const ConvLayerSpec& l, const std::string& where)
{
    if (l.channels <= 0 || l.kernel <= 0 || l.stride <= 0 || l.pad < 0 || l.pool < 0)
        throw ConfigError(where + ": channels, kernel and stride must be positive, pad and pool non-negative");
}

}  // namespace

TaskSet ModelSpec::tasks() const
{
    TaskSet s;
    for (const auto& [t, _] : heads) s.insert(t);
    return s;
}

std::size_t ModelSpec::arity(Task t) const
{
    switch (t) {
    case Task::Detection: return 2;
    case Task::Landmarks: return 2 * static_cast<std::size_t>(landmarks);
    case Task::Visibility: return static_cast<std::size_t>(landmarks);
    case Task::Pose: return 3;
    case Task::Gender:
    case Task::Smile:
    case Task::Age: return 1;
    case Task::Identity: return static_cast<std::size_t>(identity_classes);
    }
    return 0;
}

std::vector<int> trunk_extents(const ModelSpec& spec)
{
    std::vector<int> out;
    int e = spec.input_size;
    for (const auto& l : spec.trunk) {
        e = conv_extent(e, l);
        out.push_back(e);
    }
    return out;
}

void ModelSpec::validate() const
{
    if (input_channels <= 0 || input_size <= 0) throw ConfigError("model: input channels and size must be positive");
    if (trunk.empty()) throw ConfigError("model: trunk needs at least one layer");
    for (std::size_t i = 0; i < trunk.size(); ++i) check_conv(trunk[i], "model.trunk[" + std::to_string(i) + "]");
    const auto extents = trunk_extents(*this);
    for (std::size_t i = 0; i < extents.size(); ++i)
        if (extents[i] < 1) throw ConfigError("model.trunk[" + std::to_string(i) + "]: spatial extent collapses to zero");
    if (heads.empty()) throw ConfigError("model: no task heads");
    for (const auto& [t, h] : heads)
        for (int w : h.hidden)
            if (w <= 0) throw ConfigError("model.heads." + std::string(task_name(t)) + ": hidden widths must be positive");
    if (landmarks <= 0) throw ConfigError("model: landmark count must be positive");

    const auto n = static_cast<int>(trunk.size());
    if (needs_fusion(tasks())) {
        if (fusion_taps.empty()) throw ConfigError("model: fusion_taps must not be empty");
        for (std::size_t i = 0; i < fusion_taps.size(); ++i) {
            if (fusion_taps[i] < 0 || fusion_taps[i] >= n)
                throw ConfigError("model: fusion tap " + std::to_string(fusion_taps[i]) + " is not a trunk index");
            if (i > 0 && fusion_taps[i] <= fusion_taps[i - 1])
                throw ConfigError("model: fusion_taps must be strictly increasing");
        }
        const int target = extents[static_cast<std::size_t>(fusion_taps.back())];
        for (int tap : fusion_taps)
            if (adapter_kernel(extents[static_cast<std::size_t>(tap)], target) < 0)
                throw ConfigError("model: fusion tap " + std::to_string(tap) + " extent " +
                                  std::to_string(extents[static_cast<std::size_t>(tap)]) + " cannot be reduced to " +
                                  std::to_string(target));
        if (reduction_channels <= 0 || fused_fc <= 0) throw ConfigError("model: reduction and fused widths must be positive");
    }
    if (needs_spine(tasks()) && (subject_dependent_tap < 0 || subject_dependent_tap >= n))
        throw ConfigError("model: subject_dependent_tap " + std::to_string(subject_dependent_tap) + " is not a trunk index");
    if (heads.count(Task::Identity)) {
        check_conv(identity_conv, "model.identity_conv");
        if (conv_extent(extents[static_cast<std::size_t>(subject_dependent_tap)], identity_conv) < 1)
            throw ConfigError("model.identity_conv: spatial extent collapses to zero");
        if (descriptor_dim <= 0 || identity_classes <= 0)
            throw ConfigError("model: descriptor_dim and identity_classes must be positive");
    }
    if (heads.count(Task::Age) && !(std::isfinite(age_scale) && age_scale != 0.0 && std::isfinite(age_offset)))
        throw ConfigError("model: age_scale must be finite and nonzero");
}

ModelSpec ModelSpec::desk_default()
{
    ModelSpec s;
    s.trunk = {{6, 3, 1, 1, 2}, {12, 3, 1, 1, 2}, {24, 3, 1, 1, 2}};
    s.fusion_taps = {0, 1, 2};
    s.subject_dependent_tap = 2;
    for (Task t : {Task::Detection, Task::Landmarks, Task::Visibility, Task::Pose, Task::Smile}) s.heads[t] = {{32}};
    s.heads[Task::Gender] = {{48, 32}};
    s.heads[Task::Age] = {{48, 32}};
    s.heads[Task::Identity] = {{64}};
    return s;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j)
{
    reject_unknown(j,
                   {"input", "trunk", "fusion_taps", "subject_dependent_tap", "reduction_channels", "fused_fc",
                    "identity_conv", "landmarks", "descriptor_dim", "identity_classes", "age_offset", "age_scale",
                    "heads"},
                   "model");
    ModelSpec s;
    if (j.contains("input")) {
        reject_unknown(j["input"], {"channels", "size"}, "model.input");
        read_field(j["input"], "channels", s.input_channels, "model.input");
        read_field(j["input"], "size", s.input_size, "model.input");
    }
    if (!j.contains("trunk") || !j["trunk"].is_array()) throw ConfigError("model.trunk: expected an array");
    for (std::size_t i = 0; i < j["trunk"].size(); ++i)
        s.trunk.push_back(conv_from_json(j["trunk"][i], "model.trunk[" + std::to_string(i) + "]"));
    read_field(j, "fusion_taps", s.fusion_taps, "model");
    read_field(j, "subject_dependent_tap", s.subject_dependent_tap, "model");
    read_field(j, "reduction_channels", s.reduction_channels, "model");
    read_field(j, "fused_fc", s.fused_fc, "model");
    if (j.contains("identity_conv")) s.identity_conv = conv_from_json(j["identity_conv"], "model.identity_conv");
    read_field(j, "landmarks", s.landmarks, "model");
    read_field(j, "descriptor_dim", s.descriptor_dim, "model");
    read_field(j, "identity_classes", s.identity_classes, "model");
    read_field(j, "age_offset", s.age_offset, "model");
    read_field(j, "age_scale", s.age_scale, "model");
    if (!j.contains("heads") || !j["heads"].is_object()) throw ConfigError("model.heads: expected an object");
    for (const auto& [name, h] : j["heads"].items()) {
        const auto t = task_from_name(name);
        if (!t) throw ConfigError("model.heads: unknown task '" + name + "'");
        reject_unknown(h, {"hidden"}, "model.heads." + name);
        HeadSpec head;
        read_field(h, "hidden", head.hidden, "model.heads." + name);
        s.heads[*t] = head;
    }
    s.validate();
    return s;
}

ModelSpec ModelSpec::load(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open model spec " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json ModelSpec::to_json() const
{
    nlohmann::json j;
    j["input"] = {{"channels", input_channels}, {"size", input_size}};
    j["trunk"] = nlohmann::json::array();
    for (const auto& l : trunk) j["trunk"].push_back(conv_to_json(l));
    j["fusion_taps"] = fusion_taps;
    j["subject_dependent_tap"] = subject_dependent_tap;
    j["reduction_channels"] = reduction_channels;
    j["fused_fc"] = fused_fc;
    j["identity_conv"] = conv_to_json(identity_conv);
    j["landmarks"] = landmarks;
    j["descriptor_dim"] = descriptor_dim;
    j["identity_classes"] = identity_classes;
    j["age_offset"] = age_offset;
    j["age_scale"] = age_scale;
    j["heads"] = nlohmann::json::object();
    for (const auto& [t, h] : heads) j["heads"][std::string(task_name(t))] = {{"hidden", h.hidden}};
    return j;
}

Model Model::build(const ModelSpec& spec, std::uint64_t seed)
{
    spec.validate();
    Model m;
    m.spec_ = spec;
    Rng rng(seed);
    const TaskSet enabled = spec.tasks();
    const TaskSet region = enabled & kRegionTasks;
    const TaskSet aligned = enabled & kAlignedTasks;

    auto weights = [&](const std::string& path, Shape shape, std::size_t fan_in, bool activated, TaskSet users) {
        const double gain = activated ? 6.0 / (1.0 + kInitialSlope * kInitialSlope) : 3.0;
        const double bound = std::sqrt(gain / static_cast<double>(fan_in));
        Tensor w(std::move(shape));
        for (auto& v : w.mutable_data()) v = rng.uniform(-bound, bound);
        m.params_.add(path, std::move(w), users);
    };
    auto conv = [&](const std::string& prefix, const ConvLayerSpec& l, int in_c, TaskSet users) {
        const auto k = static_cast<std::size_t>(l.kernel);
        const auto out = static_cast<std::size_t>(l.channels);
        weights(prefix + "/w", {out, static_cast<std::size_t>(in_c), k, k}, static_cast<std::size_t>(in_c) * k * k, true,
                users);
        m.params_.add(prefix + "/b", Tensor::zeros({out}), users);
        m.params_.add(prefix + "/a", Tensor::filled({out}, kInitialSlope), users);
    };
    auto fc = [&](const std::string& prefix, std::size_t in, std::size_t out, bool activated, TaskSet users) {
        weights(prefix + "/w", {out, in}, in, activated, users);
        m.params_.add(prefix + "/b", Tensor::zeros({out}), users);
        if (activated) m.params_.add(prefix + "/a", Tensor::filled({out}, kInitialSlope), users);
    };
    auto head = [&](const std::string& prefix, const HeadSpec& h, std::size_t in, std::size_t out, Task t) {
        for (std::size_t i = 0; i < h.hidden.size(); ++i) {
            fc(prefix + "/fc" + std::to_string(i), in, static_cast<std::size_t>(h.hidden[i]), true, {t});
            in = static_cast<std::size_t>(h.hidden[i]);
        }
        fc(prefix + "/out", in, out, false, {t});
    };

    const auto extents = trunk_extents(spec);
    const int last_tap = region.empty() ? -1 : spec.fusion_taps.back();
    const int spine_tap = aligned.empty() ? -1 : spec.subject_dependent_tap;
    int in_c = spec.input_channels;
    for (std::size_t i = 0; i < spec.trunk.size(); ++i) {
        TaskSet users;
        if (static_cast<int>(i) <= last_tap) users = users | region;
        if (static_cast<int>(i) <= spine_tap) users = users | aligned;
        conv("trunk/conv" + std::to_string(i), spec.trunk[i], in_c, users);
        in_c = spec.trunk[i].channels;
    }

    if (!region.empty()) {
        const int target = extents[static_cast<std::size_t>(last_tap)];
        int fused_c = 0;
        for (int tap : spec.fusion_taps) {
            const auto& l = spec.trunk[static_cast<std::size_t>(tap)];
            const int k = adapter_kernel(extents[static_cast<std::size_t>(tap)], target);
            if (k > 0) conv("fusion/adapter" + std::to_string(tap), {l.channels, k, k, 0, 0}, l.channels, region);
            fused_c += l.channels;
        }
        conv("fusion/reduce", {spec.reduction_channels, 1, 1, 0, 0}, fused_c, region);
        const auto flat = static_cast<std::size_t>(spec.reduction_channels * target * target);
        fc("fusion/fc", flat, static_cast<std::size_t>(spec.fused_fc), true, region);
        for (Task t : region.list())
            head("heads/" + std::string(task_name(t)), spec.heads.at(t), static_cast<std::size_t>(spec.fused_fc),
                 spec.arity(t), t);
    }

    if (!aligned.empty()) {
        const auto& spine = spec.trunk[static_cast<std::size_t>(spine_tap)];
        const int e = extents[static_cast<std::size_t>(spine_tap)];
        const auto flat = static_cast<std::size_t>(spine.channels * e * e);
        for (Task t : {Task::Gender, Task::Age})
            if (aligned.contains(t)) head("heads/" + std::string(task_name(t)), spec.heads.at(t), flat, 1, t);
        if (aligned.contains(Task::Identity)) {
            conv("heads/identity/conv7", spec.identity_conv, spine.channels, {Task::Identity});
            const int ie = conv_extent(e, spec.identity_conv);
            std::size_t in = static_cast<std::size_t>(spec.identity_conv.channels * ie * ie);
            const auto& h = spec.heads.at(Task::Identity);
            for (std::size_t i = 0; i < h.hidden.size(); ++i) {
                fc("heads/identity/fc" + std::to_string(i), in, static_cast<std::size_t>(h.hidden[i]), true,
                   {Task::Identity});
                in = static_cast<std::size_t>(h.hidden[i]);
            }
            fc("heads/identity/descriptor", in, static_cast<std::size_t>(spec.descriptor_dim), true, {Task::Identity});
            fc("heads/identity/out", static_cast<std::size_t>(spec.descriptor_dim),
               static_cast<std::size_t>(spec.identity_classes), false, {Task::Identity});
        }
    }
    return m;
}

NodeId Model::conv_block(Graph& g, NodeId x, const std::string& prefix, const ConvLayerSpec& l) const
{
    NodeId y = ops::conv2d(g, x, param(g, prefix + "/w"), param(g, prefix + "/b"), l.stride, l.pad);
    y = ops::prelu(g, y, param(g, prefix + "/a"));
    if (l.pool > 0) y = ops::maxpool2d(g, y, l.pool, l.pool);
    return y;
}

NodeId Model::fc_block(Graph& g, NodeId x, const std::string& prefix, bool activate) const
{
    NodeId y = ops::fully_connected(g, x, param(g, prefix + "/w"), param(g, prefix + "/b"));
    if (activate) y = ops::prelu(g, y, param(g, prefix + "/a"));
    return y;
}

ModelNodes Model::forward(Graph& g, NodeId input, TaskSet tasks, const ForwardOptions& opt) const
{
    const Shape& in = g.value(input).shape();
    const auto S = static_cast<std::size_t>(spec_.input_size);
    if (in.size() != 4 || in[1] != static_cast<std::size_t>(spec_.input_channels) || in[2] != S || in[3] != S)
        throw DimensionError("model input must be [B, " + std::to_string(spec_.input_channels) + ", " +
                             std::to_string(S) + ", " + std::to_string(S) + "], got " + shape_to_string(in));
    tasks = tasks & spec_.tasks();
    const TaskSet region = tasks & kRegionTasks;
    const TaskSet aligned = tasks & kAlignedTasks;

    int depth = -1;
    if (!region.empty()) depth = spec_.fusion_taps.back();
    if (!aligned.empty()) depth = std::max(depth, spec_.subject_dependent_tap);

    std::vector<NodeId> trunk;
    NodeId x = input;
    for (int i = 0; i <= depth; ++i) {
        x = conv_block(g, x, "trunk/conv" + std::to_string(i), spec_.trunk[static_cast<std::size_t>(i)]);
        trunk.push_back(x);
    }

    ModelNodes out;
    auto head = [&](Task t, NodeId h) {
        const std::string prefix = "heads/" + std::string(task_name(t));
        const auto& hs = spec_.heads.at(t);
        for (std::size_t i = 0; i < hs.hidden.size(); ++i) h = fc_block(g, h, prefix + "/fc" + std::to_string(i), true);
        return fc_block(g, h, prefix + "/out", false);
    };
    auto flatten = [&](NodeId v) {
        const Shape& s = g.value(v).shape();
        return ops::reshape(g, v, {s[0], s[1] * s[2] * s[3]});
    };

    if (!region.empty()) {
        const auto extents = trunk_extents(spec_);
        const int target = extents[static_cast<std::size_t>(spec_.fusion_taps.back())];
        std::vector<NodeId> parts;
        for (int tap : spec_.fusion_taps) {
            NodeId f = trunk[static_cast<std::size_t>(tap)];
            if (opt.ablate_tap && *opt.ablate_tap == tap) f = g.input(Tensor::zeros(g.value(f).shape()));
            const int k = adapter_kernel(extents[static_cast<std::size_t>(tap)], target);
            if (k > 0) {
                const int c = spec_.trunk[static_cast<std::size_t>(tap)].channels;
                f = conv_block(g, f, "fusion/adapter" + std::to_string(tap), {c, k, k, 0, 0});
            }
            parts.push_back(f);
        }
        NodeId fused = parts.size() == 1 ? parts[0] : ops::concat(g, parts, 1);
        fused = conv_block(g, fused, "fusion/reduce", {spec_.reduction_channels, 1, 1, 0, 0});
        fused = fc_block(g, flatten(fused), "fusion/fc", true);
        for (Task t : region.list()) {
            NodeId h = head(t, fused);
            if (t == Task::Detection) out.detection_prob = ops::softmax(g, h);
            if (t == Task::Visibility || t == Task::Smile) h = ops::sigmoid(g, h);
            out.head[t] = h;
        }
    }

    if (!aligned.empty()) {
        const NodeId spine = trunk[static_cast<std::size_t>(spec_.subject_dependent_tap)];
        if (aligned.contains(Task::Gender)) out.head[Task::Gender] = ops::sigmoid(g, head(Task::Gender, flatten(spine)));
        if (aligned.contains(Task::Age))
            out.head[Task::Age] = ops::affine(g, head(Task::Age, flatten(spine)), spec_.age_scale, spec_.age_offset);
        if (aligned.contains(Task::Identity)) {
            NodeId h = conv_block(g, spine, "heads/identity/conv7", spec_.identity_conv);
            h = flatten(h);
            const auto& hs = spec_.heads.at(Task::Identity);
            for (std::size_t i = 0; i < hs.hidden.size(); ++i)
                h = fc_block(g, h, "heads/identity/fc" + std::to_string(i), true);
            // The descriptor is the penultimate layer before its activation.
            const NodeId d = ops::fully_connected(g, h, param(g, "heads/identity/descriptor/w"),
                                                  param(g, "heads/identity/descriptor/b"));
            out.descriptor = d;
            h = ops::prelu(g, d, param(g, "heads/identity/descriptor/a"));
            out.head[Task::Identity] = fc_block(g, h, "heads/identity/out", false);
        }
    }
    return out;
}

std::vector<TaskOutputs> Model::infer(const Tensor& batch, TaskSet tasks, const ForwardOptions& opt) const
{
    Graph g;
    const auto nodes = forward(g, g.input(batch), tasks, opt);
    const std::size_t B = batch.extent(0);
    std::vector<TaskOutputs> rows(B);
    auto row = [&](NodeId id, std::size_t r) {
        const Tensor& v = g.value(id);
        const std::size_t w = v.size() / B;
        return std::vector<double>(v.data().begin() + static_cast<long>(r * w), v.data().begin() + static_cast<long>((r + 1) * w));
    };
    for (std::size_t r = 0; r < B; ++r) {
        auto& o = rows[r];
        for (const auto& [t, id] : nodes.head) {
            o.present.insert(t);
            auto v = row(id, r);
            switch (t) {
            case Task::Detection: {
                const auto p = row(*nodes.detection_prob, r);
                o.detection = {p[0], p[1]};
                break;
            }
            case Task::Landmarks: o.landmarks = std::move(v); break;
            case Task::Visibility: o.visibility = std::move(v); break;
            case Task::Pose: o.pose = {v[0], v[1], v[2]}; break;
            case Task::Gender: o.gender = v[0]; break;
            case Task::Smile: o.smile = v[0]; break;
            case Task::Age: o.age = v[0]; break;
            case Task::Identity: o.identity_logits = std::move(v); break;
            }
        }
        if (nodes.descriptor) o.descriptor = row(*nodes.descriptor, r);
    }
    return rows;
}

void Model::load_parameters(const std::map<std::string, Tensor>& tensors)
{
    for (const auto& [path, value] : params_.values()) {
        const auto it = tensors.find(path);
        if (it == tensors.end()) throw ConfigError("checkpoint is missing parameter '" + path + "'");
        if (it->second.shape() != value.shape())
            throw ConfigError("checkpoint parameter '" + path + "' has shape " + shape_to_string(it->second.shape()) +
                              ", model expects " + shape_to_string(value.shape()));
    }
    for (const auto& [path, value] : tensors)
        if (params_.contains(path)) params_.mutable_at(path) = value;
}

}  // namespace a1o
