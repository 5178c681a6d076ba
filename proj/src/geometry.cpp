// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace a1o {

double iou(const Box& a, const Box& b)
{
    if (!(a.w > 0.0 && a.h > 0.0) || !(b.w > 0.0 && b.h > 0.0)) throw ContractError("iou: boxes must have positive area");
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

Box bounding_box(std::span<const Point> points)
{
    if (points.empty()) return {};
    double x0 = points[0].x, x1 = x0, y0 = points[0].y, y1 = y0;
    for (const auto& p : points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

Point Similarity::apply(Point p) const
{
    const double c = std::cos(theta), s = std::sin(theta);
    return {scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty};
}

Similarity Similarity::inverse() const
{
    Similarity inv;
    inv.scale = 1.0 / scale;
    inv.theta = -theta;
    const Point t = Similarity{inv.scale, inv.theta, 0.0, 0.0}.apply({tx, ty});
    inv.tx = -t.x;
    inv.ty = -t.y;
    return inv;
}

Similarity estimate_similarity(std::span<const Point> src, std::span<const Point> dst, std::span<const double> weights)
{
    if (src.size() != dst.size() || src.size() != weights.size())
        throw DimensionError("estimate_similarity: src, dst and weights must have equal length");
    double W = 0.0;
    std::size_t effective = 0;
    Point ms, md;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double w = weights[i];
        if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("estimate_similarity: weights must be non-negative");
        if (w == 0.0) continue;
        ++effective;
        W += w;
        ms.x += w * src[i].x;
        ms.y += w * src[i].y;
        md.x += w * dst[i].x;
        md.y += w * dst[i].y;
    }
    if (effective < 2) throw SingularConfiguration("estimate_similarity: need at least two weighted points");
    ms = {ms.x / W, ms.y / W};
    md = {md.x / W, md.y / W};

    double dot = 0.0, cross = 0.0, var_src = 0.0, var_dst = 0.0, spread = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double w = weights[i];
        if (w == 0.0) continue;
        const double ax = src[i].x - ms.x, ay = src[i].y - ms.y;
        const double bx = dst[i].x - md.x, by = dst[i].y - md.y;
        dot += w * (ax * bx + ay * by);
        cross += w * (ax * by - ay * bx);
        var_src += w * (ax * ax + ay * ay);
        var_dst += w * (bx * bx + by * by);
        spread += w * (src[i].x * src[i].x + src[i].y * src[i].y + dst[i].x * dst[i].x + dst[i].y * dst[i].y);
    }
    const double tiny = 1e-24 * std::max(1.0, spread);
    if (var_src <= tiny || var_dst <= tiny) throw SingularConfiguration("estimate_similarity: points are coincident");

    Similarity t;
    t.theta = std::atan2(cross, dot);
    t.scale = std::hypot(dot, cross) / var_src;
    const Point r = Similarity{t.scale, t.theta, 0.0, 0.0}.apply(ms);
    t.tx = md.x - r.x;
    t.ty = md.y - r.y;
    return t;
}

std::vector<Box> grid_proposals(int width, int height, std::span<const double> scales, double stride_fraction)
{
    if (!(stride_fraction > 0.0)) throw ContractError("grid_proposals: stride fraction must be positive");
    std::vector<Box> out;
    for (double s : scales) {
        if (!(s > 0.0)) throw ContractError("grid_proposals: scales must be positive");
        if (s > width || s > height) continue;
        const double step = std::max(1.0, std::round(s * stride_fraction));
        for (double y = 0.0; y + s <= height; y += step)
            for (double x = 0.0; x + s <= width; x += step) out.push_back({x, y, s, s});
    }
    return out;
}

std::vector<double> to_box_units(std::span<const double> xy, const Box& box)
{
    std::vector<double> uv(xy.begin(), xy.end());
    for (std::size_t i = 0; i + 1 < uv.size(); i += 2) {
        uv[i] = (uv[i] - box.x) / box.w;
        uv[i + 1] = (uv[i + 1] - box.y) / box.h;
    }
    return uv;
}

std::vector<double> from_box_units(std::span<const double> uv, const Box& box)
{
    std::vector<double> xy(uv.begin(), uv.end());
    for (std::size_t i = 0; i + 1 < xy.size(); i += 2) {
        xy[i] = box.x + xy[i] * box.w;
        xy[i + 1] = box.y + xy[i + 1] * box.h;
    }
    return xy;
}

std::vector<Point> to_points(std::span<const double> xy)
{
    if (xy.size() % 2 != 0) throw DimensionError("to_points: odd coordinate count " + std::to_string(xy.size()));
    std::vector<Point> pts(xy.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {xy[2 * i], xy[2 * i + 1]};
    return pts;
}

std::vector<double> to_xy(std::span<const Point> points)
{
    std::vector<double> xy;
    xy.reserve(points.size() * 2);
    for (const auto& p : points) {
        xy.push_back(p.x);
        xy.push_back(p.y);
    }
    return xy;
}

Point3 rotate_pose(const std::array<double, 3>& pose, const Point3& v)
{
    const double cr = std::cos(pose[0]), sr = std::sin(pose[0]);
    const double cp = std::cos(pose[1]), sp = std::sin(pose[1]);
    const double cy = std::cos(pose[2]), sy = std::sin(pose[2]);
    // Pitch about x, then yaw about y, then roll about z.
    const Point3 a{v.x, cp * v.y - sp * v.z, sp * v.y + cp * v.z};
    const Point3 b{cy * a.x + sy * a.z, a.y, -sy * a.x + cy * a.z};
    return {cr * b.x - sr * b.y, sr * b.x + cr * b.y, b.z};
}

}  // namespace a1o
