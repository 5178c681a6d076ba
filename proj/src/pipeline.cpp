// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/pipeline.hpp"

#include "a1o/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <thread>

namespace a1o {

namespace {

constexpr double kDegrees = 180.0 / std::numbers::pi;

// Smallest value whose cumulative weight reaches half the total.
double weighted_median(std::vector<std::pair<double, double>> value_weight)
{
    std::sort(value_weight.begin(), value_weight.end());
    double total = 0.0;
    for (const auto& [_, w] : value_weight) total += w;
    if (!(total > 0.0)) {
        for (auto& [_, w] : value_weight) w = 1.0;
        total = static_cast<double>(value_weight.size());
    }
    double acc = 0.0;
    for (const auto& [v, w] : value_weight) {
        acc += w;
        if (acc >= 0.5 * total) return v;
    }
    return value_weight.back().first;
}

double landmark_iou(const FaceRecord& a, const FaceRecord& b)
{
    const Box ba = bounding_box(to_points(a.landmarks)), bb = bounding_box(to_points(b.landmarks));
    if (!(ba.area() > 0.0) || !(bb.area() > 0.0)) return ba == bb ? 1.0 : 0.0;
    return iou(ba, bb);
}

bool record_order(const FaceRecord& a, const FaceRecord& b)
{
    if (a.score != b.score) return a.score > b.score;
    if (a.box.x != b.box.x) return a.box.x < b.box.x;
    return a.box.y < b.box.y;
}

std::vector<Point> template_pixels(const CanonicalTemplate& c)
{
    std::vector<Point> out;
    for (const auto& p : c.points) out.push_back({p.x * c.size, p.y * c.size});
    return out;
}

std::vector<double> usable_weights(std::span<const double> visibility, std::size_t k, double threshold)
{
    std::vector<double> w(k, 1.0);
    if (visibility.size() == k)
        for (std::size_t i = 0; i < k; ++i) w[i] = visibility[i] >= threshold ? visibility[i] : 0.0;
    return w;
}

CanonicalTemplate effective_template(const PipelineConfig& cfg, const Model& model)
{
    if (!cfg.canonical.points.empty()) return cfg.canonical;
    return CanonicalTemplate::synthetic(model.spec().input_size);
}

}  // namespace

nlohmann::json FaceRecord::to_json() const
{
    return {
        {"box", {box.x, box.y, box.w, box.h}},
        {"score", score},
        {"landmarks", landmarks},
        {"visibility", visibility},
        {"pose", {pose[0] * kDegrees, pose[1] * kDegrees, pose[2] * kDegrees}},
        {"gender", gender},
        {"smile", smile},
        {"age", age},
        {"descriptor", descriptor},
        {"warning", warning},
    };
}

void CanonicalTemplate::validate() const
{
    if (size <= 0) throw ConfigError("template size must be positive");
    if (!depth.empty() && depth.size() != points.size()) throw ConfigError("template depth needs one value per point");
    for (const auto& p : points)
        if (p.x != points.front().x || p.y != points.front().y) return;
    throw ConfigError("template needs at least two distinct points");
}

std::vector<Point> CanonicalTemplate::posed(const std::array<double, 3>& pose) const
{
    if (depth.empty()) return points;
    std::vector<Point> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point3 q = rotate_pose(pose, {points[i].x - 0.5, points[i].y - 0.5, 0.5 * depth[i]});
        out.push_back({0.5 + q.x, 0.5 + q.y});
    }
    return out;
}

CanonicalTemplate CanonicalTemplate::synthetic(int size) { return {canonical_constellation(), canonical_depth(), size}; }

void PipelineConfig::validate() const
{
    if (proposal_scales.empty()) throw ConfigError("proposal_scales must not be empty");
    for (double s : proposal_scales)
        if (!(s > 0.0)) throw ConfigError("proposal_scales must be positive");
    if (!(proposal_stride > 0.0)) throw ConfigError("proposal_stride must be positive");
    if (max_proposals == 0) throw ConfigError("max_proposals must be positive");
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) throw ConfigError("score_threshold must lie in [0, 1]");
    if (irp_rounds < 0) throw ConfigError("irp_rounds must be non-negative");
    if (!(irp_stop >= 0.0)) throw ConfigError("irp_stop must be non-negative");
    if (!(irp_consistency >= 0.0 && irp_consistency <= 1.0)) throw ConfigError("irp_consistency must lie in [0, 1]");
    if (!(nms_overlap >= 0.0 && nms_overlap <= 1.0)) throw ConfigError("nms_overlap must lie in [0, 1]");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (!canonical.points.empty()) canonical.validate();
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j)
{
    static const std::set<std::string> known{"proposal_scales", "proposal_stride", "max_proposals", "score_threshold",
                                             "irp_rounds",      "irp_stop",        "irp_consistency",        "nms_overlap",   "visibility_threshold",
                                             "template",        "threads"};
    if (!j.is_object()) throw ConfigError("pipeline config must be an object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown pipeline config field '" + key + "'");
    PipelineConfig c;
    try {
        if (j.contains("proposal_scales")) c.proposal_scales = j["proposal_scales"].get<std::vector<double>>();
        if (j.contains("proposal_stride")) c.proposal_stride = j["proposal_stride"].get<double>();
        if (j.contains("max_proposals")) c.max_proposals = j["max_proposals"].get<std::size_t>();
        if (j.contains("score_threshold")) c.score_threshold = j["score_threshold"].get<double>();
        if (j.contains("irp_rounds")) c.irp_rounds = j["irp_rounds"].get<int>();
        if (j.contains("irp_stop")) c.irp_stop = j["irp_stop"].get<double>();
        if (j.contains("irp_consistency")) c.irp_consistency = j["irp_consistency"].get<double>();
        if (j.contains("nms_overlap")) c.nms_overlap = j["nms_overlap"].get<double>();
        if (j.contains("visibility_threshold")) c.visibility_threshold = j["visibility_threshold"].get<double>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
        if (j.contains("template")) {
            const auto& t = j["template"];
            c.canonical.size = t.at("size").get<int>();
            for (const auto& p : t.at("points")) c.canonical.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            if (t.contains("depth")) c.canonical.depth = t["depth"].get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open pipeline config " + file.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

nlohmann::json PipelineConfig::to_json() const
{
    nlohmann::json j{
        {"proposal_scales", proposal_scales}, {"proposal_stride", proposal_stride}, {"max_proposals", max_proposals},
        {"score_threshold", score_threshold}, {"irp_rounds", irp_rounds},           {"irp_stop", irp_stop},
        {"irp_consistency", irp_consistency},
        {"nms_overlap", nms_overlap},         {"visibility_threshold", visibility_threshold},
        {"threads", threads},
    };
    if (!canonical.points.empty()) {
        auto pts = nlohmann::json::array();
        for (const auto& p : canonical.points) pts.push_back({p.x, p.y});
        j["template"] = {{"size", canonical.size}, {"points", pts}};
        if (!canonical.depth.empty()) j["template"]["depth"] = canonical.depth;
    }
    return j;
}

Box landmark_region(std::span<const double> landmarks, std::span<const double> visibility,
                    const std::array<double, 3>& pose, const CanonicalTemplate& canonical, double visibility_threshold)
{
    const auto dst = to_points(landmarks);
    if (dst.size() != canonical.points.size())
        throw DimensionError("landmark_region: " + std::to_string(dst.size()) + " landmarks for a " +
                             std::to_string(canonical.points.size()) + "-point template");
    const auto t = estimate_similarity(canonical.posed(pose), dst, usable_weights(visibility, dst.size(), visibility_threshold));
    const Point c = t.apply({0.5, 0.5});
    if (!std::isfinite(c.x) || !std::isfinite(c.y) || !(t.scale > 0.0) || !std::isfinite(t.scale))
        throw SingularConfiguration("landmark_region: non-finite transform");
    return {c.x - 0.5 * t.scale, c.y - 0.5 * t.scale, t.scale, t.scale};
}

std::vector<TaskOutputs> evaluate_regions(const Model& model, const Image& gray, std::span<const Box> regions, int threads)
{
    const auto S = static_cast<std::size_t>(model.spec().input_size);
    constexpr std::size_t kChunk = 64;
    const std::size_t chunks = (regions.size() + kChunk - 1) / kChunk;
    std::vector<std::vector<TaskOutputs>> parts(chunks);
    auto work = [&](std::size_t c) {
        const std::size_t lo = c * kChunk, hi = std::min(regions.size(), lo + kChunk);
        Tensor batch(Shape{hi - lo, 1, S, S});
        for (std::size_t r = lo; r < hi; ++r) {
            const Tensor crop = crop_resize(gray, regions[r], model.spec().input_size);
            std::copy(crop.data().begin(), crop.data().end(), batch.mutable_data().begin() + static_cast<long>((r - lo) * S * S));
        }
        parts[c] = model.forward_region(batch);
    };
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), chunks);
    if (n <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) work(c);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t c = t; c < chunks; c += n) work(c);
            });
        for (auto& th : pool) th.join();
    }
    std::vector<TaskOutputs> out;
    for (auto& p : parts)
        for (auto& o : p) out.push_back(std::move(o));
    return out;
}

FaceRecord record_from_region(const Box& region, const TaskOutputs& out)
{
    FaceRecord r;
    r.box = region;
    r.score = out.detection[1];
    r.landmarks = from_box_units(out.landmarks, region);
    r.visibility = out.visibility;
    r.pose = out.pose;
    r.smile = out.smile;
    return r;
}

std::vector<FaceRecord> landmarks_nms(std::vector<FaceRecord> records, double overlap_thresh)
{
    bool suppressed = true;
    while (suppressed) {
        suppressed = false;
        std::sort(records.begin(), records.end(), record_order);
        std::vector<bool> gone(records.size(), false);
        std::vector<FaceRecord> kept;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (gone[i]) continue;
            std::vector<std::size_t> group{i};
            for (std::size_t j = i + 1; j < records.size(); ++j)
                if (!gone[j] && landmark_iou(records[i], records[j]) > overlap_thresh) {
                    gone[j] = true;
                    group.push_back(j);
                }
            FaceRecord keeper = records[i];
            if (group.size() > 1) {
                suppressed = true;
                auto median_of = [&](auto get) {
                    std::vector<std::pair<double, double>> vw;
                    for (auto g : group) vw.emplace_back(get(records[g]), records[g].score);
                    return weighted_median(std::move(vw));
                };
                for (std::size_t k = 0; k < keeper.landmarks.size(); ++k)
                    keeper.landmarks[k] = median_of([k](const FaceRecord& r) { return r.landmarks[k]; });
                for (std::size_t k = 0; k < 3; ++k) keeper.pose[k] = median_of([k](const FaceRecord& r) { return r.pose[k]; });
                keeper.box.x = median_of([](const FaceRecord& r) { return r.box.x; });
                keeper.box.y = median_of([](const FaceRecord& r) { return r.box.y; });
                keeper.box.w = median_of([](const FaceRecord& r) { return r.box.w; });
                keeper.box.h = median_of([](const FaceRecord& r) { return r.box.h; });
                keeper.score = median_of([](const FaceRecord& r) { return r.score; });
            }
            kept.push_back(std::move(keeper));
        }
        records = std::move(kept);
    }
    std::sort(records.begin(), records.end(), record_order);
    return records;
}

FaceRecord iterative_region_proposals(const Model& model, const FaceRecord& record, const Image& gray, int rounds,
                                      const PipelineConfig& cfg)
{
    const CanonicalTemplate canonical = effective_template(cfg, model);
    FaceRecord current = record;
    for (int round = 0; round < rounds; ++round) {
        Box region;
        try {
            region = landmark_region(current.landmarks, current.visibility, current.pose, canonical, cfg.visibility_threshold);
        } catch (const SingularConfiguration&) {
            FaceRecord out = record;
            out.warning = true;
            return out;
        }
        if (!(region.w >= 2.0)) {
            FaceRecord out = record;
            out.warning = true;
            return out;
        }
        const auto outputs = evaluate_regions(model, gray, std::span<const Box>(&region, 1), 1);
        FaceRecord next = record_from_region(region, outputs[0]);
        next.warning = current.warning;
        double movement = 0.0;
        for (std::size_t k = 0; k + 1 < next.landmarks.size(); k += 2)
            movement += std::hypot(next.landmarks[k] - current.landmarks[k], next.landmarks[k + 1] - current.landmarks[k + 1]);
        movement /= static_cast<double>(std::max<std::size_t>(1, next.landmarks.size() / 2));
        current = std::move(next);
        if (movement < cfg.irp_stop) break;
    }
    return current;
}

Similarity alignment_transform(const FaceRecord& record, const CanonicalTemplate& canonical, double visibility_threshold)
{
    const auto dst = to_points(record.landmarks);
    if (dst.size() != canonical.points.size())
        throw DimensionError("align_face: " + std::to_string(dst.size()) + " landmarks for a " +
                             std::to_string(canonical.points.size()) + "-point template");
    try {
        return estimate_similarity(template_pixels(canonical), dst, usable_weights(record.visibility, dst.size(), visibility_threshold));
    } catch (const SingularConfiguration& e) {
        throw AlignmentError(std::string("align_face: ") + e.what());
    }
}

Tensor align_face(const Image& gray, const FaceRecord& record, const CanonicalTemplate& canonical, double visibility_threshold)
{
    return warp(gray, alignment_transform(record, canonical, visibility_threshold), canonical.size);
}

Tensor flip_patch(const Tensor& patch)
{
    if (patch.rank() != 4) throw DimensionError("flip_patch: expected [B, C, H, W], got " + shape_to_string(patch.shape()));
    Tensor out(patch.shape());
    const std::size_t W = patch.extent(3), rows = patch.size() / W;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t x = 0; x < W; ++x) out[r * W + x] = patch[r * W + (W - 1 - x)];
    return out;
}

namespace {

std::vector<double> normalized(std::vector<double> v)
{
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (!(n > 0.0)) throw ContractError("cannot normalize a zero descriptor");
    for (double& x : v) x /= n;
    return v;
}

}  // namespace

std::vector<double> descriptor(const Model& model, const Tensor& patch)
{
    const auto S = static_cast<std::size_t>(model.spec().input_size);
    if (patch.shape() != Shape{1, 1, S, S}) throw DimensionError("descriptor: patch must be [1, 1, S, S]");
    Tensor both(Shape{2, 1, S, S});
    const Tensor flipped = flip_patch(patch);
    std::copy(patch.data().begin(), patch.data().end(), both.mutable_data().begin());
    std::copy(flipped.data().begin(), flipped.data().end(), both.mutable_data().begin() + static_cast<long>(S * S));
    const auto out = model.infer(both, TaskSet{Task::Identity});
    std::vector<double> d(out[0].descriptor.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = 0.5 * (out[0].descriptor[i] + out[1].descriptor[i]);
    return normalized(std::move(d));
}

std::vector<double> media_pool(const std::vector<std::pair<std::string, std::vector<double>>>& descriptors)
{
    if (descriptors.empty()) throw ContractError("media_pool: no descriptors");
    const std::size_t D = descriptors.front().second.size();
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> media;
    for (const auto& [id, d] : descriptors) {
        if (d.size() != D) throw DimensionError("media_pool: descriptors differ in length");
        auto& [sum, n] = media[id];
        if (sum.empty()) sum.assign(D, 0.0);
        for (std::size_t i = 0; i < D; ++i) sum[i] += d[i];
        ++n;
    }
    std::vector<double> pooled(D, 0.0);
    for (const auto& [_, entry] : media)
        for (std::size_t i = 0; i < D; ++i) pooled[i] += entry.first[i] / static_cast<double>(entry.second);
    for (double& x : pooled) x /= static_cast<double>(media.size());
    return normalized(std::move(pooled));
}

std::vector<FaceRecord> detect_and_analyze(const Model& model, const Image& image, const PipelineConfig& cfg)
{
    cfg.validate();
    const Image gray = to_gray(image);
    auto proposals = grid_proposals(gray.width, gray.height, cfg.proposal_scales, cfg.proposal_stride);
    if (proposals.size() > cfg.max_proposals) proposals.resize(cfg.max_proposals);
    if (proposals.empty()) return {};

    // Stage 1: subject-independent tasks on every proposal.
    const auto outputs = evaluate_regions(model, gray, proposals, cfg.threads);
    std::vector<FaceRecord> candidates;
    for (std::size_t i = 0; i < proposals.size(); ++i)
        if (outputs[i].detection[1] >= cfg.score_threshold) candidates.push_back(record_from_region(proposals[i], outputs[i]));
    const CanonicalTemplate canonical = effective_template(cfg, model);
    for (auto& c : candidates) c = iterative_region_proposals(model, c, gray, cfg.irp_rounds, cfg);
    // A face is close to a fixed point of refinement; clutter rarely is.
    auto inconsistent = [&](const FaceRecord& r) {
        if (cfg.irp_rounds == 0 || r.warning) return false;
        try {
            const Box implied = landmark_region(r.landmarks, r.visibility, r.pose, canonical, cfg.visibility_threshold);
            return !(implied.w > 0.0) || iou(r.box, implied) < cfg.irp_consistency;
        } catch (const SingularConfiguration&) {
            return true;
        }
    };
    std::erase_if(candidates, [&](const FaceRecord& r) { return r.score < cfg.score_threshold || inconsistent(r); });
    auto faces = landmarks_nms(std::move(candidates), cfg.nms_overlap);

    // Stage 2: aligned, flip-averaged subject-dependent tasks.
    for (auto& f : faces) {
        Tensor patch;
        try {
            patch = align_face(gray, f, canonical, cfg.visibility_threshold);
        } catch (const AlignmentError&) {
            patch = crop_resize(gray, f.box, canonical.size);
            f.warning = true;
        }
        if (canonical.size != model.spec().input_size) patch = crop_resize(tensor_to_image(patch), Box{0, 0, 1.0 * canonical.size, 1.0 * canonical.size}, model.spec().input_size);
        const auto S = static_cast<std::size_t>(model.spec().input_size);
        Tensor both(Shape{2, 1, S, S});
        const Tensor flipped = flip_patch(patch);
        std::copy(patch.data().begin(), patch.data().end(), both.mutable_data().begin());
        std::copy(flipped.data().begin(), flipped.data().end(), both.mutable_data().begin() + static_cast<long>(S * S));
        const auto out = model.forward_aligned(both);
        f.gender = 0.5 * (out[0].gender + out[1].gender);
        f.age = 0.5 * (out[0].age + out[1].age);
        std::vector<double> d(out[0].descriptor.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = 0.5 * (out[0].descriptor[i] + out[1].descriptor[i]);
        f.descriptor = normalized(std::move(d));
    }
    return faces;
}

}  // namespace a1o
