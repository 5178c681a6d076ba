// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/image.hpp"
#include "a1o/model.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace a1o {

/// Everything predicted for one detected face. Coordinates are image pixels;
/// pose is (roll, pitch, yaw) in radians.
struct FaceRecord {
    Box box;
    double score = 0.0;
    std::vector<double> landmarks;
    std::vector<double> visibility;
    std::array<double, 3> pose{};
    double gender = 0.0;
    double smile = 0.0;
    double age = 0.0;
    std::vector<double> descriptor;
    bool warning = false;  // a refinement step was skipped on degenerate landmarks

    /// Pose written in degrees.
    nlohmann::json to_json() const;
    friend bool operator==(const FaceRecord&, const FaceRecord&) = default;
};

/// Reference landmark layout in the unit square plus the aligned patch side.
/// `depth` optionally places each point on a sphere of radius 0.5 around the
/// square's center so the layout can be posed.
struct CanonicalTemplate {
    std::vector<Point> points;
    std::vector<double> depth;
    int size = 32;

    /// Throws ConfigError unless two points differ.
    void validate() const;
    /// Points as seen under `pose`; the frontal layout without depth.
    std::vector<Point> posed(const std::array<double, 3>& pose) const;
    /// The synthetic generator's constellation at the given patch side.
    static CanonicalTemplate synthetic(int size);
};

class AlignmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    std::vector<double> proposal_scales{24, 28, 32, 36, 40, 44};
    double proposal_stride = 0.25;
    std::size_t max_proposals = 4000;
    double score_threshold = 0.7;
    int irp_rounds = 1;
    double irp_stop = 0.5;  // mean landmark movement in pixels that ends refinement
    double irp_consistency = 0.5;  // min IOU between a refined box and the box its landmarks imply
    double nms_overlap = 0.1;
    double visibility_threshold = 0.5;
    CanonicalTemplate canonical;  // empty points: synthetic layout at the model's input size
    int threads = 1;

    void validate() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::filesystem::path& file);
    nlohmann::json to_json() const;
};

/// Box of the template frame implied by a landmark set: the unit square
/// mapped through the visibility-weighted similarity fit of the posed
/// template onto the landmarks. Throws SingularConfiguration.
Box landmark_region(std::span<const double> landmarks, std::span<const double> visibility,
                    const std::array<double, 3>& pose, const CanonicalTemplate& canonical, double visibility_threshold);

/// Region-task outputs for image regions, batched over cfg.threads threads.
std::vector<TaskOutputs> evaluate_regions(const Model& model, const Image& gray, std::span<const Box> regions, int threads);

/// Builds a record from region outputs in box units.
FaceRecord record_from_region(const Box& region, const TaskOutputs& out);

/// Greedy suppression by landmark-box IOU, keepers' landmarks, pose, box and
/// score re-estimated as the score-weighted median of their group, repeated until nothing is
/// suppressed. Output sorted by (score desc, x, y).
std::vector<FaceRecord> landmarks_nms(std::vector<FaceRecord> records, double overlap_thresh);

/// Re-runs the region tasks on the template frame of the current landmarks
/// up to `rounds` times, stopping once landmarks move less than cfg.irp_stop
/// pixels on average. Degenerate landmarks leave the record unchanged with
/// `warning` set.
FaceRecord iterative_region_proposals(const Model& model, const FaceRecord& record, const Image& gray, int rounds,
                                      const PipelineConfig& cfg);

/// Similarity taking patch pixels to image pixels, fitted from the template
/// (scaled to the patch) onto the record's visible landmarks.
Similarity alignment_transform(const FaceRecord& record, const CanonicalTemplate& canonical, double visibility_threshold);

/// Warps the face into a canonical patch [1, 1, size, size]. Throws
/// AlignmentError with fewer than two usable landmarks.
Tensor align_face(const Image& gray, const FaceRecord& record, const CanonicalTemplate& canonical,
                  double visibility_threshold = 0.5);

Tensor flip_patch(const Tensor& patch);

/// Mean of the identity descriptors of a patch and its mirror image,
/// L2-normalized.
std::vector<double> descriptor(const Model& model, const Tensor& patch);

/// Average within each media id, then across media, then L2-normalize.
std::vector<double> media_pool(const std::vector<std::pair<std::string, std::vector<double>>>& descriptors);

/// Both stages: proposals, region tasks, thresholding, refinement, NMS,
/// alignment and the subject-dependent tasks.
std::vector<FaceRecord> detect_and_analyze(const Model& model, const Image& image, const PipelineConfig& cfg);

}  // namespace a1o
