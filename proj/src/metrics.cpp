// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace a1o {

void MetricReport::validate() const
{
    for (const auto& [name, curve] : curves)
        for (std::size_t i = 1; i < curve.size(); ++i)
            if (curve[i].first < curve[i - 1].first) throw ContractError("curve '" + name + "' has decreasing x values");
}

nlohmann::json MetricReport::to_json() const
{
    nlohmann::json j;
    j["name"] = name;
    j["scalars"] = scalars;
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [key, curve] : curves) {
        auto& arr = c[key] = nlohmann::json::array();
        for (const auto& [x, y] : curve) arr.push_back({x, y});
    }
    j["curves"] = c;
    j["notes"] = notes;
    return j;
}

void MetricReport::write_curves(const std::filesystem::path& dir) const
{
    std::filesystem::create_directories(dir);
    for (const auto& [key, curve] : curves) {
        std::ofstream out(dir / (key + ".csv"));
        if (!out) throw ContractError("cannot write curve " + key);
        out << std::setprecision(17) << "x,y\n";
        for (const auto& [x, y] : curve) out << x << ',' << y << '\n';
    }
}

double nme(std::span<const Point> pred, std::span<const Point> gt, const Box& face_box, std::span<const double> visible)
{
    if (pred.size() != gt.size() || pred.size() != visible.size())
        throw DimensionError("nme: pred, gt and visibility must have equal length");
    if (!(face_box.w > 0.0 && face_box.h > 0.0)) throw ContractError("nme: face box must have positive area");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (visible[i] <= 0.0) continue;
        sum += std::hypot(pred[i].x - gt[i].x, pred[i].y - gt[i].y);
        ++n;
    }
    if (n == 0) throw ContractError("nme: no visible landmarks");
    return 100.0 * sum / static_cast<double>(n) / std::sqrt(face_box.w * face_box.h);
}

double round_to_15(double degrees) { return 15.0 * std::round(degrees / 15.0); }

double yaw_error(double pred_degrees, double gt_degrees) { return std::abs(round_to_15(pred_degrees) - gt_degrees); }

PrecisionRecall precision_recall(const std::vector<std::vector<ScoredBox>>& detections,
                                 const std::vector<std::vector<Box>>& gts, double iou_thresh)
{
    if (detections.size() != gts.size()) throw DimensionError("precision_recall: one detection list per image required");
    struct Ranked {
        double score;
        std::size_t image, index;
    };
    std::vector<Ranked> ranked;
    std::size_t total_gt = 0;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        total_gt += gts[i].size();
        for (std::size_t k = 0; k < detections[i].size(); ++k) ranked.push_back({detections[i][k].score, i, k});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

    std::vector<std::vector<bool>> taken(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) taken[i].assign(gts[i].size(), false);
    PrecisionRecall out;
    std::size_t tp = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        const auto& d = detections[ranked[r].image][ranked[r].index];
        const auto& g = gts[ranked[r].image];
        double best = -1.0;
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (taken[ranked[r].image][k]) continue;
            const double o = iou(d.box, g[k]);
            if (o > best) {
                best = o;
                best_k = k;
            }
        }
        if (best >= iou_thresh) {
            taken[ranked[r].image][best_k] = true;
            ++tp;
        }
        const double recall = total_gt ? static_cast<double>(tp) / static_cast<double>(total_gt) : 0.0;
        out.curve.emplace_back(recall, static_cast<double>(tp) / static_cast<double>(r + 1));
    }
    // Precision envelope from the right, then area over recall increments.
    std::vector<double> envelope(out.curve.size());
    double running = 0.0;
    for (std::size_t i = out.curve.size(); i-- > 0;) {
        running = std::max(running, out.curve[i].second);
        envelope[i] = running;
    }
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < out.curve.size(); ++i) {
        out.average_precision += (out.curve[i].first - prev_recall) * envelope[i];
        prev_recall = out.curve[i].first;
    }
    return out;
}

double accuracy(std::span<const double> probs, std::span<const int> labels, double thresh)
{
    if (probs.size() != labels.size()) throw DimensionError("accuracy: probabilities and labels differ in length");
    if (probs.empty()) throw ContractError("accuracy: empty input");
    std::size_t right = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) right += (probs[i] >= thresh) == (labels[i] == 1);
    return 100.0 * static_cast<double>(right) / static_cast<double>(probs.size());
}

double age_epsilon_error(double y, double a, double sigma)
{
    if (!(sigma > 0.0)) throw ContractError("age_epsilon_error: sigma must be positive");
    return 1.0 - std::exp(-(y - a) * (y - a) / (2.0 * sigma * sigma));
}

Roc roc_tar_at_far(std::span<const VerificationPair> pairs, std::span<const double> fars)
{
    std::size_t genuine = 0, impostor = 0;
    for (const auto& p : pairs) (p.same ? genuine : impostor) += 1;
    if (genuine == 0 || impostor == 0) throw ContractError("roc_tar_at_far: need both genuine and impostor pairs");

    std::vector<VerificationPair> sorted(pairs.begin(), pairs.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const VerificationPair& a, const VerificationPair& b) { return a.similarity > b.similarity; });
    Roc out;
    out.curve.emplace_back(0.0, 0.0);
    std::size_t ta = 0, fa = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        // Lowering the threshold to this score admits every pair tied with it.
        const double s = sorted[i].similarity;
        for (; i < sorted.size() && sorted[i].similarity == s; ++i) (sorted[i].same ? ta : fa) += 1;
        out.curve.emplace_back(static_cast<double>(fa) / static_cast<double>(impostor),
                               static_cast<double>(ta) / static_cast<double>(genuine));
    }
    for (double f : fars) {
        double best = 0.0;
        for (const auto& [far, tar] : out.curve)
            if (far <= f) best = std::max(best, tar);
        out.tar.push_back(best);
    }
    return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v)
{
    if (u.size() != v.size()) throw DimensionError("cosine_similarity: vectors differ in length");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw ContractError("cosine_similarity: zero vector");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

std::vector<double> cmc_rank_k(std::span<const Labeled> probes, std::span<const Labeled> gallery, std::span<const int> ks)
{
    if (gallery.empty()) throw ContractError("cmc_rank_k: empty gallery");
    std::vector<double> hits(ks.size(), 0.0);
    if (probes.empty()) return hits;
    for (const auto& p : probes) {
        std::vector<double> sim(gallery.size());
        for (std::size_t g = 0; g < gallery.size(); ++g) sim[g] = cosine_similarity(p.descriptor, gallery[g].descriptor);
        std::vector<std::size_t> order(gallery.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
        std::size_t rank = 0;  // first position (1-based) holding the probe's identity; 0 if absent
        for (std::size_t r = 0; r < order.size(); ++r)
            if (gallery[order[r]].label == p.label) {
                rank = r + 1;
                break;
            }
        for (std::size_t k = 0; k < ks.size(); ++k)
            if (rank > 0 && ks[k] > 0 && rank <= static_cast<std::size_t>(ks[k])) hits[k] += 1.0;
    }
    for (auto& h : hits) h /= static_cast<double>(probes.size());
    return hits;
}

}  // namespace a1o
