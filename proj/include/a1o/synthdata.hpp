// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/sample.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace a1o {

/// Number of landmarks in the synthetic constellation: left eye, right eye,
/// nose tip, left mouth corner, right mouth corner (left/right as seen in
/// the image).
inline constexpr int kSynthLandmarks = 5;

/// Left-right landmark correspondence under a horizontal flip.
inline constexpr std::array<int, kSynthLandmarks> kSynthFlipPairs{1, 0, 2, 4, 3};

struct FaceParams {
    int identity = 0;
    double age = 30.0;  // [0, 80]
    int gender = 0;
    int smile = 0;
    double roll = 0.0;  // radians
    double pitch = 0.0;
    double yaw = 0.0;  // [-pi/2, pi/2]
    double cx = 16.0;  // face center in pixels
    double cy = 16.0;
    double size = 32.0;  // side of the face box
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Scene {
    Image image;
    std::vector<LabelSet> faces;  // one full label set per rendered face
};

/// Renders faces over a cluttered background. Deterministic in `seed`.
/// Throws GenerationError if a landmark would leave the canvas.
Scene render_scene(std::span<const FaceParams> faces, int width, int height, double noise, std::uint64_t seed);

/// Single-face convenience wrapper.
Scene render(const FaceParams& face, int width, int height, double noise, std::uint64_t seed);

/// Frontal, gender-neutral constellation of the mean identity inside the
/// unit face box; the canonical alignment target.
std::vector<Point> canonical_constellation();

/// Depth of each canonical landmark on the unit face sphere (toward the
/// camera when frontal).
std::vector<double> canonical_depth();

/// Frontal constellation of one face (identity, gender and smile applied)
/// inside the unit face box.
std::vector<Point> face_constellation(const FaceParams& face);

/// Face brightness as a function of age; strictly decreasing.
double age_intensity(double age);

struct DomainOptions {
    double negative_fraction = 0.25;  // face-free share of detection pools
    int identities = 8;
    int identity_offset = 0;
    int canvas = 64;  // detection canvases
    int patch = 32;   // pre-aligned attribute patches
    double min_face = 28.0;
    double max_face = 36.0;
    double max_yaw = 1.0471975511965976;  // 60 degrees
    double max_pitch = 0.2617993877991494;  // 15 degrees
    double max_roll = 0.3490658503988659;  // 20 degrees
    double noise = 0.02;
};

/// Task sets of the named presets (aflw, casia, morph, imdb_wiki, adience,
/// celeba) or of a comma-separated task list. Throws ConfigError.
TaskSet parse_role(const std::string& role);

/// Draws a full parameter set for sample `index` of a pool.
FaceParams draw_face(TaskSet role, std::size_t index, std::uint64_t seed, const DomainOptions& opt);

/// n samples whose labels are restricted to `role`. Pools that include
/// detection render faces with varied pose on a larger canvas and include
/// face-free images; the others render frontal pre-aligned patches.
SamplePool make_domain(const std::string& name, TaskSet role, std::size_t n, std::uint64_t seed,
                       const DomainOptions& opt = {});

/// `<dir>/manifest.jsonl` plus `<dir>/images/NNNN.pgm`.
void write_pool(const std::filesystem::path& dir, const SamplePool& pool);
/// Throws FormatError naming the line on malformed input.
SamplePool read_pool(const std::filesystem::path& dir);

}  // namespace a1o
