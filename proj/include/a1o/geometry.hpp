// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/errors.hpp"

#include <array>
#include <span>
#include <vector>

namespace a1o {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned rectangle; (x, y) is the top-left corner in pixels.
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    Point center() const { return {x + 0.5 * w, y + 0.5 * h}; }
    friend bool operator==(const Box&, const Box&) = default;
};

/// Intersection over union. Throws ContractError on a box without positive area.
double iou(const Box& a, const Box& b);

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Rz(roll) * Ry(yaw) * Rx(pitch) applied to v; pose is (roll, pitch, yaw)
/// in radians.
Point3 rotate_pose(const std::array<double, 3>& pose, const Point3& v);

/// Tight box around the points (may have zero area).
Box bounding_box(std::span<const Point> points);

/// x' = scale * R(theta) * x + t
struct Similarity {
    double scale = 1.0;
    double theta = 0.0;
    double tx = 0.0;
    double ty = 0.0;

    Point apply(Point p) const;
    Similarity inverse() const;
};

/// Weighted least-squares similarity mapping src onto dst. Needs at least two
/// positively weighted, non-coincident points on both sides; throws
/// SingularConfiguration otherwise.
Similarity estimate_similarity(std::span<const Point> src, std::span<const Point> dst, std::span<const double> weights);

/// Multi-scale square sliding windows. A window of side s moves in steps of
/// max(1, round(s * stride_fraction)) pixels and never leaves the image;
/// scales larger than the image are skipped. Order: scale, then row, then
/// column.
std::vector<Box> grid_proposals(int width, int height, std::span<const double> scales, double stride_fraction);

/// Interleaved image coordinates to box units ((x - box.x) / box.w, ...)
/// and back.
std::vector<double> to_box_units(std::span<const double> xy, const Box& box);
std::vector<double> from_box_units(std::span<const double> uv, const Box& box);

/// Interleaved x0, y0, x1, y1, ... to points and back.
std::vector<Point> to_points(std::span<const double> xy);
std::vector<double> to_xy(std::span<const Point> points);

}  // namespace a1o
