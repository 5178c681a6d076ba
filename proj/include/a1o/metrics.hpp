// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/geometry.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace a1o {

using Curve = std::vector<std::pair<double, double>>;

struct MetricReport {
    std::string name;
    std::map<std::string, double> scalars;
    std::map<std::string, Curve> curves;
    std::vector<std::string> notes;

    /// Throws ContractError if a curve's x values decrease.
    void validate() const;
    nlohmann::json to_json() const;
    /// One `<curve>.csv` per curve with an `x,y` header.
    void write_curves(const std::filesystem::path& dir) const;
};

/// 100 * mean over visible landmarks of |pred - gt| / sqrt(w * h).
double nme(std::span<const Point> pred, std::span<const Point> gt, const Box& face_box, std::span<const double> visible);

/// Nearest multiple of 15 degrees, ties away from zero.
double round_to_15(double degrees);
double yaw_error(double pred_degrees, double gt_degrees);

struct ScoredBox {
    Box box;
    double score = 0.0;
};

struct PrecisionRecall {
    Curve curve;  // (recall, precision) after each ranked detection
    double average_precision = 0.0;
};

/// Detections ranked by descending score over all images (ties by image,
/// then input order). Each detection takes the unmatched ground truth of its
/// image with the highest IOU if that IOU is at least `iou_thresh`. AP is the
/// area under the precision envelope (all-point interpolation).
PrecisionRecall precision_recall(const std::vector<std::vector<ScoredBox>>& detections,
                                 const std::vector<std::vector<Box>>& gts, double iou_thresh = 0.5);

/// Percentage of (p >= thresh) == label. Throws ContractError when empty.
double accuracy(std::span<const double> probs, std::span<const int> labels, double thresh = 0.5);

/// 1 - exp(-(y - a)^2 / (2 sigma^2)).
double age_epsilon_error(double y, double a, double sigma);

struct VerificationPair {
    double similarity = 0.0;
    bool same = false;
};

struct Roc {
    Curve curve;             // (FAR, TAR) per threshold, FAR ascending
    std::vector<double> tar;  // one per requested FAR
};

/// Accepts pairs with similarity >= threshold, for a threshold above every
/// score and at every distinct score. TAR at FAR f is the largest TAR whose
/// FAR does not exceed f. Throws ContractError unless both classes occur.
Roc roc_tar_at_far(std::span<const VerificationPair> pairs, std::span<const double> fars);

struct Labeled {
    std::vector<double> descriptor;
    int label = 0;
};

/// Fraction of probes whose identity appears among the k most similar
/// gallery entries (cosine; ties keep gallery order). Probes whose identity
/// is not in the gallery count as misses.
std::vector<double> cmc_rank_k(std::span<const Labeled> probes, std::span<const Labeled> gallery, std::span<const int> ks);

/// u.v / (|u| |v|). Throws ContractError on a zero vector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace a1o
