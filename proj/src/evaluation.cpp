// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace a1o {

namespace {

constexpr double kDegrees = 180.0 / std::numbers::pi;
constexpr std::size_t kChunk = 64;

Box input_region(const Sample& s)
{
    if (s.labels.box) return *s.labels.box;
    return {0.0, 0.0, static_cast<double>(s.image.width), static_cast<double>(s.image.height)};
}

// A face the model sees as one row: the gt box of a detection image or the
// whole pre-aligned patch.
struct FaceRow {
    const Sample* sample;
    Box region;
    TaskOutputs out;
};

std::vector<TaskOutputs> infer_crops(const Model& model, const std::vector<Tensor>& crops, TaskSet tasks)
{
    const auto S = static_cast<std::size_t>(model.spec().input_size);
    std::vector<TaskOutputs> out;
    for (std::size_t lo = 0; lo < crops.size(); lo += kChunk) {
        const std::size_t hi = std::min(crops.size(), lo + kChunk);
        Tensor batch(Shape{hi - lo, 1, S, S});
        for (std::size_t i = lo; i < hi; ++i)
            std::copy(crops[i].data().begin(), crops[i].data().end(),
                      batch.mutable_data().begin() + static_cast<long>((i - lo) * S * S));
        for (auto& o : model.infer(batch, tasks)) out.push_back(std::move(o));
    }
    return out;
}

std::vector<FaceRow> face_rows(const Model& model, std::span<const SamplePool> pools, TaskSet tasks, bool flip_average)
{
    std::vector<FaceRow> rows;
    std::vector<Tensor> crops, flipped;
    for (const auto& pool : pools)
        for (const auto& s : pool.samples) {
            bool wanted = false;
            for (Task t : tasks.list()) wanted = wanted || s.labels.present.contains(t);
            if (!wanted) continue;
            if (s.labels.present.contains(Task::Detection) && !s.labels.box) continue;
            rows.push_back({&s, input_region(s), {}});
            crops.push_back(crop_resize(to_gray(s.image), rows.back().region, model.spec().input_size));
            if (flip_average) flipped.push_back(flip_patch(crops.back()));
        }
    const TaskSet run = tasks & model.spec().tasks();
    auto outs = infer_crops(model, crops, run);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].out = std::move(outs[i]);
    if (flip_average) {
        const auto mirrored = infer_crops(model, flipped, run & kAlignedTasks);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto& o = rows[i].out;
            const auto& m = mirrored[i];
            o.gender = 0.5 * (o.gender + m.gender);
            o.age = 0.5 * (o.age + m.age);
            for (std::size_t k = 0; k < o.descriptor.size(); ++k) o.descriptor[k] = 0.5 * (o.descriptor[k] + m.descriptor[k]);
            for (std::size_t k = 0; k < o.identity_logits.size(); ++k)
                o.identity_logits[k] = 0.5 * (o.identity_logits[k] + m.identity_logits[k]);
        }
    }
    return rows;
}

void require(bool any, const std::string& protocol, const std::string& what)
{
    if (!any) throw ContractError("protocol '" + protocol + "': no samples labeled for " + what);
}

void add_binary(MetricReport& r, const std::vector<FaceRow>& rows, Task task, const std::string& protocol)
{
    std::vector<double> p;
    std::vector<int> y;
    for (const auto& row : rows) {
        const auto& l = row.sample->labels;
        if (task == Task::Gender && l.gender) {
            p.push_back(row.out.gender);
            y.push_back(*l.gender);
        }
        if (task == Task::Smile && l.smile) {
            p.push_back(row.out.smile);
            y.push_back(*l.smile);
        }
    }
    const std::string name(task_name(task));
    require(!p.empty(), protocol, name);
    r.scalars[name + "_accuracy"] = accuracy(p, y);
    r.scalars[name + "_count"] = static_cast<double>(p.size());
}

void add_landmarks(MetricReport& r, const std::vector<FaceRow>& rows, const std::string& protocol)
{
    double sum = 0.0, worst = 0.0;
    std::size_t n = 0;
    for (const auto& row : rows) {
        const auto& l = row.sample->labels;
        if (!l.present.contains(Task::Landmarks) || !l.box) continue;
        const auto pred = to_points(from_box_units(row.out.landmarks, row.region));
        const auto gt = to_points(l.landmarks);
        std::vector<double> vis = l.visibility.empty() ? std::vector<double>(gt.size(), 1.0) : l.visibility;
        const double e = nme(pred, gt, *l.box, vis);
        sum += e;
        worst = std::max(worst, e);
        ++n;
    }
    require(n > 0, protocol, "landmarks");
    r.scalars["nme"] = sum / static_cast<double>(n);
    r.scalars["nme_max"] = worst;
    r.scalars["landmarks_count"] = static_cast<double>(n);
}

void add_age(MetricReport& r, const std::vector<FaceRow>& rows, const std::string& protocol)
{
    double abs_sum = 0.0, eps_sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : rows) {
        const auto& l = row.sample->labels;
        if (!l.age) continue;
        abs_sum += std::abs(row.out.age - *l.age);
        eps_sum += age_epsilon_error(row.out.age, *l.age, l.age_sigma.value_or(3.0));
        ++n;
    }
    require(n > 0, protocol, "age");
    r.scalars["age_mae"] = abs_sum / static_cast<double>(n);
    r.scalars["age_epsilon_error"] = eps_sum / static_cast<double>(n);
    r.scalars["age_count"] = static_cast<double>(n);
}

void add_identity(MetricReport& r, const std::vector<FaceRow>& rows, const EvalOptions& opt, const std::string& protocol)
{
    // The first sample of each identity is enrolled; the rest are probes.
    std::vector<Labeled> gallery, probes, all;
    std::map<int, bool> enrolled;
    std::size_t correct = 0;
    for (const auto& row : rows) {
        const auto& l = row.sample->labels;
        if (!l.identity) continue;
        Labeled item{row.out.descriptor, *l.identity};
        all.push_back(item);
        (enrolled[*l.identity] ? probes : gallery).push_back(item);
        enrolled[*l.identity] = true;
        const auto& logits = row.out.identity_logits;
        const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
        correct += best == *l.identity;
    }
    require(!all.empty(), protocol, "identity");
    r.scalars["identity_classification_accuracy"] = 100.0 * static_cast<double>(correct) / static_cast<double>(all.size());
    r.scalars["identity_count"] = static_cast<double>(all.size());
    r.scalars["gallery_identities"] = static_cast<double>(gallery.size());
    if (probes.empty()) {
        r.notes.push_back("every identity has a single sample; no probes for CMC");
        return;
    }
    const auto cmc = cmc_rank_k(probes, gallery, opt.ranks);
    for (std::size_t k = 0; k < opt.ranks.size(); ++k) {
        r.scalars["rank" + std::to_string(opt.ranks[k])] = 100.0 * cmc[k];
        r.curves["cmc"].emplace_back(opt.ranks[k], cmc[k]);
    }
    r.notes.push_back("closed-set CMC: gallery holds the first sample of each identity");

    std::vector<VerificationPair> pairs;
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            pairs.push_back({cosine_similarity(all[i].descriptor, all[j].descriptor), all[i].label == all[j].label});
    bool genuine = false, impostor = false;
    for (const auto& p : pairs) (p.same ? genuine : impostor) = true;
    if (genuine && impostor) {
        const auto roc = roc_tar_at_far(pairs, opt.fars);
        r.curves["roc"] = roc.curve;
        for (std::size_t f = 0; f < opt.fars.size(); ++f) {
            char key[48];
            std::snprintf(key, sizeof key, "tar_at_far_%g", opt.fars[f]);
            r.scalars[key] = roc.tar[f];
        }
    }
}

void add_detection_proposals(MetricReport& r, const Model& model, std::span<const SamplePool> pools, const EvalOptions& opt)
{
    std::size_t pos = 0, pos_right = 0, neg = 0, neg_right = 0;
    for (const auto& pool : pools)
        for (const auto& s : pool.samples) {
            if (!s.labels.present.contains(Task::Detection)) continue;
            const Image gray = to_gray(s.image);
            const auto proposals = grid_proposals(gray.width, gray.height, opt.proposal_scales, opt.proposal_stride);
            std::vector<Box> kept;
            std::vector<int> label;
            for (const auto& p : proposals) {
                const double o = s.labels.box ? iou(p, *s.labels.box) : 0.0;
                if (o > opt.positive_iou) label.push_back(1);
                else if (o < opt.negative_iou) label.push_back(0);
                else continue;
                kept.push_back(p);
            }
            const auto outs = evaluate_regions(model, gray, kept, opt.threads);
            for (std::size_t i = 0; i < kept.size(); ++i) {
                const bool face = outs[i].detection[1] >= 0.5;
                if (label[i] == 1) {
                    ++pos;
                    pos_right += face;
                } else {
                    ++neg;
                    neg_right += !face;
                }
            }
        }
    require(pos > 0 && neg > 0, "fit", "detection");
    r.scalars["detection_positive_accuracy"] = 100.0 * static_cast<double>(pos_right) / static_cast<double>(pos);
    r.scalars["detection_negative_accuracy"] = 100.0 * static_cast<double>(neg_right) / static_cast<double>(neg);
    r.scalars["detection_positives"] = static_cast<double>(pos);
    r.scalars["detection_negatives"] = static_cast<double>(neg);
}

void add_pipeline_detection(MetricReport& r, const Model& model, std::span<const SamplePool> pools, const EvalOptions& opt)
{
    std::vector<std::vector<ScoredBox>> dets;
    std::vector<std::vector<Box>> gts;
    for (const auto& pool : pools)
        for (const auto& s : pool.samples) {
            if (!s.labels.present.contains(Task::Detection)) continue;
            std::vector<ScoredBox> d;
            for (const auto& f : detect_and_analyze(model, s.image, opt.pipeline)) d.push_back({f.box, f.score});
            dets.push_back(std::move(d));
            gts.push_back(s.labels.box ? std::vector<Box>{*s.labels.box} : std::vector<Box>{});
        }
    require(!dets.empty(), "detection", "detection");
    const auto pr = precision_recall(dets, gts);
    r.scalars["average_precision"] = pr.average_precision;
    r.scalars["images"] = static_cast<double>(dets.size());
    std::size_t n = 0;
    for (const auto& d : dets) n += d.size();
    r.scalars["detections"] = static_cast<double>(n);
    r.curves["precision_recall"] = pr.curve;
}

void add_pose(MetricReport& r, const std::vector<FaceRow>& rows)
{
    double yaw = 0.0, yaw_rounded = 0.0, roll = 0.0, pitch = 0.0;
    std::size_t n = 0;
    for (const auto& row : rows) {
        const auto& l = row.sample->labels;
        if (!l.pose) continue;
        roll += std::abs(row.out.pose[0] - (*l.pose)[0]) * kDegrees;
        pitch += std::abs(row.out.pose[1] - (*l.pose)[1]) * kDegrees;
        yaw += std::abs(row.out.pose[2] - (*l.pose)[2]) * kDegrees;
        yaw_rounded += yaw_error(row.out.pose[2] * kDegrees, round_to_15((*l.pose)[2] * kDegrees));
        ++n;
    }
    require(n > 0, "pose", "pose");
    const double d = static_cast<double>(n);
    r.scalars["roll_mae_degrees"] = roll / d;
    r.scalars["pitch_mae_degrees"] = pitch / d;
    r.scalars["yaw_mae_degrees"] = yaw / d;
    r.scalars["yaw_error_rounded_degrees"] = yaw_rounded / d;
    r.notes.push_back("rounded yaw error compares against ground truth rounded to 15 degrees");
}

}  // namespace

const std::vector<std::string>& protocol_names()
{
    static const std::vector<std::string> names{"fit", "detection", "landmarks", "pose", "gender", "smile", "age", "identity"};
    return names;
}

MetricReport evaluate(const Model& model, std::span<const SamplePool> pools, const std::string& protocol, const EvalOptions& opt)
{
    const auto& names = protocol_names();
    if (std::find(names.begin(), names.end(), protocol) == names.end()) throw ConfigError("unknown protocol '" + protocol + "'");
    MetricReport r;
    r.name = protocol;
    if (protocol == "fit") {
        const auto rows = face_rows(model, pools, model.spec().tasks(), false);
        add_detection_proposals(r, model, pools, opt);
        add_landmarks(r, rows, protocol);
        add_binary(r, rows, Task::Gender, protocol);
        add_binary(r, rows, Task::Smile, protocol);
        add_age(r, rows, protocol);
        add_identity(r, rows, opt, protocol);
    } else if (protocol == "detection") {
        add_pipeline_detection(r, model, pools, opt);
    } else if (protocol == "landmarks") {
        add_landmarks(r, face_rows(model, pools, TaskSet{Task::Landmarks}, false), protocol);
    } else if (protocol == "pose") {
        add_pose(r, face_rows(model, pools, TaskSet{Task::Pose}, false));
    } else if (protocol == "gender") {
        add_binary(r, face_rows(model, pools, TaskSet{Task::Gender}, true), Task::Gender, protocol);
    } else if (protocol == "smile") {
        add_binary(r, face_rows(model, pools, TaskSet{Task::Smile}, false), Task::Smile, protocol);
    } else if (protocol == "age") {
        add_age(r, face_rows(model, pools, TaskSet{Task::Age}, true), protocol);
    } else {
        add_identity(r, face_rows(model, pools, TaskSet{Task::Identity}, true), opt, protocol);
    }
    r.validate();
    return r;
}

}  // namespace a1o
