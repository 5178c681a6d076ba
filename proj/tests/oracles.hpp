// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations shared by the unit tests and the
// acceptance run.

#pragma once

#include "a1o/geometry.hpp"
#include "a1o/metrics.hpp"
#include "a1o/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace a1o::oracle {

inline std::vector<Point> random_points(Rng& rng, std::size_t k)
{
    std::vector<Point> p;
    for (std::size_t i = 0; i < k; ++i) p.push_back({rng.uniform(0, 50), rng.uniform(0, 50)});
    return p;
}

inline Box random_box(Rng& rng)
{
    // Coarse grid so that exact overlaps and ties show up.
    return {static_cast<double>(rng.below(6)), static_cast<double>(rng.below(6)), static_cast<double>(1 + rng.below(4)),
            static_cast<double>(1 + rng.below(4))};
}

// Matches the top-n ranked detections from scratch for every n, then sums
// the best precision at or beyond each recall step.
inline double ap_oracle(const std::vector<std::vector<ScoredBox>>& dets, const std::vector<std::vector<Box>>& gts, double thresh)
{
    struct Ref {
        std::size_t image, index;
        double score;
    };
    std::vector<Ref> all;
    std::size_t total_gt = 0;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        total_gt += gts[i].size();
        for (std::size_t k = 0; k < dets[i].size(); ++k) all.push_back({i, k, dets[i][k].score});
    }
    if (total_gt == 0 || all.empty()) return 0.0;
    // Insertion sort: a later entry only moves ahead of strictly lower scores.
    for (std::size_t i = 1; i < all.size(); ++i)
        for (std::size_t j = i; j > 0 && all[j - 1].score < all[j].score; --j) std::swap(all[j - 1], all[j]);

    std::vector<double> precision, recall;
    for (std::size_t n = 1; n <= all.size(); ++n) {
        std::vector<std::vector<int>> used(gts.size());
        for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gts[i].size(), 0);
        std::size_t tp = 0;
        for (std::size_t r = 0; r < n; ++r) {
            const auto& d = dets[all[r].image][all[r].index];
            int pick = -1;
            double best = -1;
            for (std::size_t k = 0; k < gts[all[r].image].size(); ++k) {
                if (used[all[r].image][k]) continue;
                const double o = iou(d.box, gts[all[r].image][k]);
                if (o > best) best = o, pick = static_cast<int>(k);
            }
            if (pick >= 0 && best >= thresh) used[all[r].image][static_cast<std::size_t>(pick)] = 1, ++tp;
        }
        precision.push_back(static_cast<double>(tp) / static_cast<double>(n));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    }
    double ap = 0.0;
    for (std::size_t n = 0; n < all.size(); ++n) {
        const double prev = n == 0 ? 0.0 : recall[n - 1];
        if (recall[n] == prev) continue;
        ap += (recall[n] - prev) * *std::max_element(precision.begin() + static_cast<long>(n), precision.end());
    }
    return ap;
}

inline double tar_oracle(std::span<const VerificationPair> pairs, double far)
{
    std::vector<double> thresholds{std::numeric_limits<double>::infinity()};
    for (const auto& p : pairs) thresholds.push_back(p.similarity);
    double g = 0, i = 0;
    for (const auto& p : pairs) (p.same ? g : i) += 1;
    double best = 0.0;
    for (double t : thresholds) {
        double ta = 0, fa = 0;
        for (const auto& p : pairs)
            if (p.similarity >= t) (p.same ? ta : fa) += 1;
        if (fa / i <= far) best = std::max(best, ta / g);
    }
    return best;
}

inline double cmc_oracle(std::span<const Labeled> probes, std::span<const Labeled> gallery, int k)
{
    double hits = 0;
    for (const auto& p : probes) {
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            double dot = 0, a = 0, b = 0;
            for (std::size_t d = 0; d < p.descriptor.size(); ++d) {
                dot += p.descriptor[d] * gallery[g].descriptor[d];
                a += p.descriptor[d] * p.descriptor[d];
                b += gallery[g].descriptor[d] * gallery[g].descriptor[d];
            }
            ranked.emplace_back(dot / (std::sqrt(a) * std::sqrt(b)), g);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        for (int r = 0; r < k && r < static_cast<int>(ranked.size()); ++r)
            if (gallery[ranked[static_cast<std::size_t>(r)].second].label == p.label) {
                hits += 1;
                break;
            }
    }
    return hits / static_cast<double>(probes.size());
}

// Overlap counted cell by cell; valid for boxes on the integer grid.
inline double iou_by_cells(const Box& a, const Box& b)
{
    auto inside = [](const Box& r, double x, double y) { return x > r.x && x < r.right() && y > r.y && y < r.bottom(); };
    int inter = 0, uni = 0;
    for (int y = -2; y < 24; ++y)
        for (int x = -2; x < 24; ++x) {
            const bool ia = inside(a, x + 0.5, y + 0.5), ib = inside(b, x + 0.5, y + 0.5);
            inter += ia && ib;
            uni += ia || ib;
        }
    return static_cast<double>(inter) / uni;
}

inline double nme_oracle(std::span<const Point> pred, std::span<const Point> gt, const Box& box, std::span<const double> vis)
{
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (vis[i] == 1.0) {
            sum += std::sqrt((pred[i].x - gt[i].x) * (pred[i].x - gt[i].x) + (pred[i].y - gt[i].y) * (pred[i].y - gt[i].y));
            ++n;
        }
    return 100.0 * sum / n / std::sqrt(box.w * box.h);
}

}  // namespace a1o::oracle
