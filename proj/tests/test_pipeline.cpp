// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/pipeline.hpp"
#include "a1o/synthdata.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace a1o;

namespace {

constexpr double kPi = std::numbers::pi;

FaceRecord record_with(std::vector<double> landmarks, double score, Box box = {0, 0, 10, 10})
{
    FaceRecord r;
    r.box = box;
    r.score = score;
    r.visibility.assign(landmarks.size() / 2, 1.0);
    r.landmarks = std::move(landmarks);
    return r;
}

FaceRecord random_record(Rng& rng)
{
    const double cx = rng.uniform(0, 60), cy = rng.uniform(0, 60), s = rng.uniform(4, 20);
    std::vector<double> lm;
    for (const auto& p : canonical_constellation()) {
        lm.push_back(cx + s * (p.x - 0.5) + rng.uniform(-1, 1));
        lm.push_back(cy + s * (p.y - 0.5) + rng.uniform(-1, 1));
    }
    FaceRecord r = record_with(lm, rng.uniform(0.5, 1.0), {cx - s / 2, cy - s / 2, s, s});
    r.pose = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-1, 1)};
    return r;
}

double landmark_box_iou(const FaceRecord& a, const FaceRecord& b)
{
    return iou(bounding_box(to_points(a.landmarks)), bounding_box(to_points(b.landmarks)));
}

// Template built from one face's own frontal constellation and sphere depth.
CanonicalTemplate exact_template(const FaceParams& f, int size)
{
    CanonicalTemplate t{face_constellation(f), {}, size};
    for (const auto& p : t.points) {
        const double bx = 2 * p.x - 1, by = 2 * p.y - 1;
        t.depth.push_back(std::sqrt(1 - bx * bx - by * by));
    }
    return t;
}

}  // namespace

TEST(CanonicalTemplate, Validation)
{
    EXPECT_NO_THROW(CanonicalTemplate::synthetic(32).validate());
    EXPECT_THROW((CanonicalTemplate{{{0.5, 0.5}, {0.5, 0.5}}, {}, 32}.validate()), ConfigError);
    EXPECT_THROW((CanonicalTemplate{{{0.2, 0.5}, {0.8, 0.5}}, {}, 0}.validate()), ConfigError);
    EXPECT_THROW((CanonicalTemplate{{{0.2, 0.5}, {0.8, 0.5}}, {1.0}, 32}.validate()), ConfigError);
    const auto t = CanonicalTemplate::synthetic(32);
    const auto frontal = t.posed({0, 0, 0});
    for (std::size_t i = 0; i < frontal.size(); ++i) {
        EXPECT_NEAR(frontal[i].x, t.points[i].x, 1e-15);
        EXPECT_NEAR(frontal[i].y, t.points[i].y, 1e-15);
    }
}

TEST(LandmarkRegion, RecoversTheGeneratorBoxUnderPose)
{
    Rng rng(5);
    for (int n = 0; n < 50; ++n) {
        FaceParams f;
        f.identity = static_cast<int>(rng.below(8));
        f.gender = static_cast<int>(rng.below(2));
        f.smile = static_cast<int>(rng.below(2));
        f.roll = rng.uniform(-0.35, 0.35);
        f.pitch = rng.uniform(-0.26, 0.26);
        f.yaw = rng.uniform(-1.0, 1.0);
        f.size = rng.uniform(24, 40);
        f.cx = f.cy = 32;
        const auto labels = render(f, 64, 64, 0.0, 1).faces[0];
        const Box exact = landmark_region(labels.landmarks, labels.visibility, *labels.pose, exact_template(f, 32), 0.5);
        EXPECT_NEAR(exact.x, labels.box->x, 1e-9);
        EXPECT_NEAR(exact.y, labels.box->y, 1e-9);
        EXPECT_NEAR(exact.w, labels.box->w, 1e-9);
        const Box mean = landmark_region(labels.landmarks, labels.visibility, *labels.pose, CanonicalTemplate::synthetic(32), 0.5);
        EXPECT_GT(iou(mean, *labels.box), 0.7);
    }
    const std::vector<double> same(10, 3.0);
    EXPECT_THROW(landmark_region(same, std::vector<double>(5, 1.0), {0, 0, 0}, CanonicalTemplate::synthetic(32), 0.5),
                 SingularConfiguration);
}

TEST(LandmarksNms, Examples)
{
    const auto single = landmarks_nms({record_with({1, 1, 5, 5}, 0.9)}, 0.5);
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(single[0], record_with({1, 1, 5, 5}, 0.9));

    const auto twins = landmarks_nms({record_with({1, 1, 5, 5}, 0.8), record_with({1, 1, 5, 5}, 0.9)}, 0.5);
    ASSERT_EQ(twins.size(), 1u);
    EXPECT_EQ(twins[0].score, 0.9);

    // Landmark boxes (0,0,2,2) and (1,1,2,2) overlap with IOU 1/7.
    const auto apart = landmarks_nms({record_with({0, 0, 2, 2}, 0.9), record_with({1, 1, 3, 3}, 0.8)}, 0.5);
    EXPECT_EQ(apart.size(), 2u);
}

TEST(LandmarksNms, KeeperTakesTheScoreWeightedMedian)
{
    const auto out = landmarks_nms({record_with({0, 0, 10, 10}, 0.9, {0, 0, 10, 10}), record_with({1, 0, 11, 10}, 0.8, {1, 0, 10, 10}),
                                    record_with({2, 0, 12, 10}, 0.7, {2, 0, 14, 10})},
                                   0.5);
    ASSERT_EQ(out.size(), 1u);
    // Weights 0.9, 0.8, 0.7: half the total (1.2) is first reached at the middle value.
    EXPECT_EQ(out[0].landmarks, (std::vector<double>{1, 0, 11, 10}));
    EXPECT_EQ(out[0].score, 0.8);
    EXPECT_EQ(out[0].box, (Box{1, 0, 10, 10}));

    const auto heavy = landmarks_nms({record_with({0, 0, 10, 10}, 0.99), record_with({1, 0, 11, 10}, 0.2), record_with({2, 0, 12, 10}, 0.2)}, 0.5);
    EXPECT_EQ(heavy[0].landmarks[0], 0.0);
}

TEST(LandmarksNms, IdempotentAndSeparatedOnRandomSets)
{
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FaceRecord> records;
        const auto n = 1 + rng.below(10);
        for (std::size_t i = 0; i < n; ++i) records.push_back(random_record(rng));
        const double thresh = rng.uniform(0.05, 0.7);
        const auto once = landmarks_nms(records, thresh);
        const auto twice = landmarks_nms(once, thresh);
        ASSERT_EQ(once, twice) << "trial " << trial;
        ASSERT_FALSE(once.empty());
        for (std::size_t i = 0; i < once.size(); ++i) {
            for (std::size_t j = i + 1; j < once.size(); ++j) ASSERT_LE(landmark_box_iou(once[i], once[j]), thresh);
            if (i > 0) ASSERT_GE(once[i - 1].score, once[i].score);
        }
    }
}

TEST(IterativeRegionProposals, ZeroRoundsIsIdentity)
{
    const Model m = test::constant_head_model(true);
    Rng rng(1);
    const auto r = random_record(rng);
    const Image img(64, 64, 1, 0.5);
    EXPECT_EQ(iterative_region_proposals(m, r, img, 0, PipelineConfig{}), r);
}

TEST(IterativeRegionProposals, DegenerateLandmarksAreFlagged)
{
    const Model m = test::constant_head_model(true);
    const auto r = record_with(std::vector<double>(10, 7.0), 0.9);
    const auto out = iterative_region_proposals(m, r, Image(64, 64, 1, 0.5), 3, PipelineConfig{});
    EXPECT_TRUE(out.warning);
    FaceRecord unflagged = out;
    unflagged.warning = false;
    EXPECT_EQ(unflagged, r);
}

TEST(IterativeRegionProposals, FixedPointIsStable)
{
    const Model m = test::constant_head_model(true);
    const Box region{10, 12, 30, 30};
    const auto canon = canonical_constellation();
    std::vector<double> lm;
    for (const auto& p : canon) {
        lm.push_back(region.x + p.x * region.w);
        lm.push_back(region.y + p.y * region.h);
    }
    const auto start = record_with(lm, 0.99, region);
    const auto out = iterative_region_proposals(m, start, Image(64, 64, 1, 0.3), 1, PipelineConfig{});
    for (std::size_t k = 0; k < lm.size(); ++k) EXPECT_NEAR(out.landmarks[k], lm[k], 1e-9);
    EXPECT_NEAR(out.box.x, region.x, 1e-9);
    EXPECT_NEAR(out.box.w, region.w, 1e-9);
    EXPECT_FALSE(out.warning);
}

TEST(AlignFace, TemplateLandmarksGiveTheBoxCrop)
{
    Rng rng(3);
    Image img(48, 48);
    for (auto& v : img.data) v = rng.uniform();
    const auto canonical = CanonicalTemplate::synthetic(16);
    const Box box{7, 9, 24, 24};
    std::vector<double> lm;
    for (const auto& p : canonical.points) {
        lm.push_back(box.x + p.x * box.w);
        lm.push_back(box.y + p.y * box.h);
    }
    const auto patch = align_face(img, record_with(lm, 1.0, box), canonical);
    const auto crop = crop_resize(img, box, 16);
    ASSERT_EQ(patch.shape(), crop.shape());
    for (std::size_t i = 0; i < patch.size(); ++i) ASSERT_NEAR(patch[i], crop[i], 1e-9);

    const auto flat = align_face(Image(48, 48, 1, 0.4), record_with(lm, 1.0, box), canonical);
    for (double v : flat.data()) ASSERT_NEAR(v, 0.4, 1e-12);

    auto hidden = record_with(lm, 1.0, box);
    hidden.visibility = {1, 0, 0, 0, 0};
    EXPECT_THROW(align_face(img, hidden, canonical), AlignmentError);
}

TEST(AlignFace, GroundTruthLandmarksLandOnTheTemplate)
{
    Rng rng(8);
    for (int n = 0; n < 40; ++n) {
        FaceParams f;
        f.identity = static_cast<int>(rng.below(8));
        f.gender = static_cast<int>(rng.below(2));
        f.smile = static_cast<int>(rng.below(2));
        f.roll = rng.uniform(-kPi / 6, kPi / 6);
        f.size = rng.uniform(24, 40);
        f.cx = rng.uniform(24, 40);
        f.cy = rng.uniform(24, 40);
        const auto labels = render(f, 64, 64, 0.0, 2).faces[0];
        FaceRecord r = record_with(labels.landmarks, 1.0, *labels.box);
        r.visibility = labels.visibility;
        const auto gt = to_points(labels.landmarks);

        // The face's own layout is recovered exactly; the shared template to
        // within a pixel of a 32-pixel patch.
        const auto own = exact_template(f, 32);
        const auto to_patch = alignment_transform(r, own, 0.5).inverse();
        const auto canonical = CanonicalTemplate::synthetic(32);
        const auto to_canonical = alignment_transform(r, canonical, 0.5).inverse();
        double mean = 0.0;
        for (std::size_t k = 0; k < gt.size(); ++k) {
            const Point p = to_patch.apply(gt[k]);
            ASSERT_NEAR(p.x, own.points[k].x * 32, 1e-9);
            ASSERT_NEAR(p.y, own.points[k].y * 32, 1e-9);
            const Point q = to_canonical.apply(gt[k]);
            mean += std::hypot(q.x - canonical.points[k].x * 32, q.y - canonical.points[k].y * 32) / static_cast<double>(gt.size());
        }
        EXPECT_LT(mean, 1.0);
    }
}

TEST(Descriptor, UnitNormAndFlipInvariance)
{
    const Model m = Model::build(test::toy_spec(), 21);
    Rng rng(22);
    const Tensor patch = test::random_tensor(rng, {1, 1, 16, 16}, 0.0, 1.0);
    const auto d = descriptor(m, patch);
    double n = 0.0;
    for (double v : d) n += v * v;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);

    // A mirror-symmetric patch gives the single-pass descriptor.
    Tensor sym = patch;
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 8; x < 16; ++x) sym[y * 16 + x] = sym[y * 16 + (15 - x)];
    const auto ds = descriptor(m, sym);
    auto single = m.forward_aligned(sym)[0].descriptor;
    double sn = 0.0;
    for (double v : single) sn += v * v;
    for (std::size_t i = 0; i < single.size(); ++i) EXPECT_NEAR(ds[i], single[i] / std::sqrt(sn), 1e-12);

    EXPECT_EQ(flip_patch(flip_patch(patch)), patch);
    EXPECT_THROW(descriptor(m, Tensor(Shape{1, 1, 8, 8})), DimensionError);
}

TEST(Descriptor, GoldenVector)
{
    const Model m = Model::build(test::toy_spec(), 2024);
    Tensor patch(Shape{1, 1, 16, 16});
    for (std::size_t i = 0; i < patch.size(); ++i) patch[i] = static_cast<double>((i * 37) % 101) / 100.0;
    const auto d = descriptor(m, patch);
    const std::vector<double> golden{-0.078445372908152664, -0.061783884924665571, -0.13337216068785324, 0.30236770382151751,
                                    -0.080522547981475248, -0.15242059564284};
    for (std::size_t i = 0; i < golden.size(); ++i) EXPECT_NEAR(d[i], golden[i], 1e-12) << i;
}

TEST(MediaPool, Examples)
{
    const auto one = media_pool({{"a", {3, 4}}});
    EXPECT_NEAR(one[0], 0.6, 1e-15);
    EXPECT_NEAR(one[1], 0.8, 1e-15);

    const auto two = media_pool({{"a", {1, 0, 0}}, {"b", {0, 1, 0}}});
    EXPECT_NEAR(two[0], std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(two[1], std::sqrt(0.5), 1e-15);
    EXPECT_EQ(two[2], 0.0);

    // Media are weighted equally regardless of how many frames they hold.
    const auto uneven = media_pool({{"a", {1, 0}}, {"a", {1, 0}}, {"a", {1, 0}}, {"b", {0, 1}}});
    EXPECT_NEAR(uneven[0], uneven[1], 1e-15);

    EXPECT_THROW(media_pool({}), ContractError);
    EXPECT_THROW(media_pool({{"a", {1, 0}}, {"b", {1}}}), DimensionError);
}

TEST(MediaPool, DuplicationAndPermutationInvariance)
{
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<std::string, std::vector<double>>> items;
        const auto n = 1 + rng.below(8);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> d(6);
            for (double& v : d) v = rng.uniform(-1, 1);
            items.push_back({"m" + std::to_string(rng.below(3)), d});
        }
        const auto base = media_pool(items);

        auto doubled = items;
        const std::string target = items[0].first;
        for (const auto& it : items)
            if (it.first == target) doubled.push_back(it);
        const auto dup = media_pool(doubled);

        auto shuffled = items;
        for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
        const auto perm = media_pool(shuffled);
        for (std::size_t k = 0; k < base.size(); ++k) {
            ASSERT_NEAR(dup[k], base[k], 1e-12);
            ASSERT_NEAR(perm[k], base[k], 1e-12);
        }
    }
}

TEST(DetectAndAnalyze, QuietModelOnBlankImageFindsNothing)
{
    const Model m = test::constant_head_model(false);
    PipelineConfig cfg;
    cfg.proposal_scales = {16, 24};
    EXPECT_TRUE(detect_and_analyze(m, Image(48, 48, 1, 0.5), cfg).empty());
}

TEST(DetectAndAnalyze, FiringModelYieldsCompleteSeparatedRecords)
{
    const Model m = test::constant_head_model(true);
    PipelineConfig cfg;
    cfg.proposal_scales = {16, 24};
    cfg.threads = 2;
    Rng rng(4);
    Image img(48, 40, 3);
    for (auto& v : img.data) v = rng.uniform();
    const auto faces = detect_and_analyze(m, img, cfg);
    ASSERT_FALSE(faces.empty());
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const auto& f = faces[i];
        EXPECT_GT(f.box.area(), 0.0);
        EXPECT_GE(f.score, cfg.score_threshold);
        EXPECT_LE(f.score, 1.0);
        EXPECT_EQ(f.landmarks.size(), 10u);
        EXPECT_EQ(f.descriptor.size(), 32u);
        for (std::size_t j = i + 1; j < faces.size(); ++j) EXPECT_LE(landmark_box_iou(f, faces[j]), cfg.nms_overlap);
    }
    cfg.threads = 1;
    EXPECT_EQ(detect_and_analyze(m, img, cfg), faces);

    const auto j = faces[0].to_json();
    for (const char* key : {"box", "score", "landmarks", "visibility", "pose", "gender", "smile", "age", "descriptor"})
        EXPECT_TRUE(j.contains(key)) << key;
}

TEST(FaceRecord, PoseIsWrittenInDegrees)
{
    FaceRecord r;
    r.pose = {kPi / 2, 0.0, -kPi / 4};
    const auto j = r.to_json();
    EXPECT_NEAR(j["pose"][0].get<double>(), 90.0, 1e-12);
    EXPECT_NEAR(j["pose"][2].get<double>(), -45.0, 1e-12);
}

TEST(PipelineConfig, JsonRoundTripAndUnknownFields)
{
    const auto c = PipelineConfig::from_json(nlohmann::json::parse(R"({"score_threshold": 0.8, "irp_rounds": 2,
        "template": {"size": 24, "points": [[0.3, 0.4], [0.7, 0.4]], "depth": [0.9, 0.9]}})"));
    EXPECT_EQ(c.score_threshold, 0.8);
    EXPECT_EQ(c.irp_rounds, 2);
    EXPECT_EQ(c.canonical.size, 24);
    EXPECT_EQ(c.canonical.points.size(), 2u);
    EXPECT_EQ(PipelineConfig::from_json(c.to_json()).to_json(), c.to_json());
    try {
        PipelineConfig::from_json(nlohmann::json::parse(R"({"nms": 0.3})"));
        FAIL() << "unknown field accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("nms"), std::string::npos);
    }
    EXPECT_THROW(PipelineConfig::from_json(nlohmann::json::parse(R"({"score_threshold": 2})")), ConfigError);
}
