// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include "cli.hpp"

#include "a1o/evaluation.hpp"
#include "a1o/gradcheck.hpp"
#include "a1o/losses.hpp"
#include "a1o/pipeline.hpp"
#include "a1o/synthdata.hpp"
#include "a1o/trainer.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

using namespace a1o;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void report(int id, bool pass, const std::string& detail)
{
    std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
    if (!pass) ++failures;
}

void note(const std::string& text) { std::cout << "  " << text << std::endl; }

// 1 --------------------------------------------------------------------

void gradient_suite()
{
    const auto t0 = Clock::now();
    const auto rows = run_gradient_suite({}, 20, 2024);
    const double dt = seconds_since(t0);
    bool all = true;
    double worst = 0.0;
    for (const auto& r : rows) {
        all = all && r.passed;
        worst = std::max(worst, r.max_relative_error);
        if (!r.passed) note(r.name + fmt(" max relative error %.3g", r.max_relative_error));
    }
    report(1, all && dt < 120.0,
           fmt("%zu ops and losses x 20 instances, worst relative error %.2e, %.1f s", rows.size(), worst, dt));
}

// 2 --------------------------------------------------------------------

void mtl_decomposition()
{
    const Model model = Model::build(test::toy_spec(), 11);
    std::vector<SamplePool> pools{make_domain("all", TaskSet::all(), 4, 41)};
    TrainConfig cfg;
    cfg.age.switch_iteration = 0;
    const std::vector<BatchItem> batch{{0, 0}};
    const auto plan = plan_regions(pools, batch, cfg, 0);
    const Sample& sample = pools[0].samples[0];

    std::map<Task, GradientMap> isolated;
    for (Task t : kAllTasks)
        isolated[t] = model.params().complete(sample_loss(model, sample, plan[0], cfg, TaskWeights::only(t), 0).gradients);

    Rng rng(12);
    double worst = 0.0;
    std::size_t shared = 0;
    for (int trial = 0; trial < 3; ++trial) {
        TaskWeights w;
        for (Task t : kAllTasks) w[t] = rng.uniform(0.1, 3.0);
        const auto combined = model.params().complete(sample_loss(model, sample, plan[0], cfg, w, 0).gradients);
        shared = 0;
        for (const auto& [path, users] : model.sharing_report()) {
            if (users.list().size() < 2) continue;
            ++shared;
            const auto& c = combined.at(path);
            for (std::size_t i = 0; i < c.size(); ++i) {
                double expected = 0.0;
                for (Task t : kAllTasks) expected += w[t] * isolated[t].at(path)[i];
                worst = std::max(worst, std::abs(c[i] - expected));
            }
        }
    }
    report(2, shared > 0 && worst <= 1e-12,
           fmt("3 weight vectors over %zu shared tensors, max |difference| %.2e", shared, worst));
}

// 3 --------------------------------------------------------------------

void age_loss_behavior()
{
    const double sigma = 3.0, step = 1e-3;
    const double far = std::max(std::abs(losses::age(30.0, 0.0, sigma, 1.0).grad), std::abs(losses::age(-30.0, 0.0, sigma, 1.0).grad));

    double best = 0.0, best_d = 0.0;
    for (int i = 0; i <= 40000; ++i) {
        const double d = i * step;
        const double g = std::abs(losses::age(d, 0.0, sigma, 1.0).grad);
        if (g > best) best = g, best_d = d;
    }
    const bool peak = std::abs(best_d - sigma) <= step + 1e-12;

    Rng rng(3);
    bool exact = true;
    for (int i = 0; i < 1000; ++i) {
        const double y = rng.uniform(-80, 80), a = rng.uniform(-80, 80);
        exact = exact && losses::age(y, a, sigma, 0.0).grad == y - a;
    }

    AgeLossParams p;
    bool schedule = losses::lambda_schedule(p.switch_iteration - 1, p) == 0.0 && losses::lambda_schedule(p.switch_iteration, p) == 1.0;
    p.switch_iteration = 1234;
    schedule = schedule && losses::lambda_schedule(1233, p) == 0.0 && losses::lambda_schedule(1234, p) == 1.0;

    report(3, far < 1e-9 && peak && exact && schedule,
           fmt("|grad| at 30 = %.2e, peak at %.3f, lambda 0 exact: %s, schedule switch: %s", far, best_d, exact ? "yes" : "no",
               schedule ? "yes" : "no"));
}

// 4 --------------------------------------------------------------------

double iou_formula(const Box& a, const Box& b)
{
    const double w = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double h = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    return w * h / (a.w * a.h + b.w * b.h - w * h);
}

void iou_gating()
{
    Rng rng(404);
    std::size_t mismatches = 0;
    for (int n = 0; n < 1000; ++n) {
        const Box gt{rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(1, 20), rng.uniform(1, 20)};
        Box p;
        if (n % 2 == 0)
            p = {gt.x + rng.uniform(-0.4, 0.4) * gt.w, gt.y + rng.uniform(-0.4, 0.4) * gt.h, gt.w * rng.uniform(0.7, 1.4),
                 gt.h * rng.uniform(0.7, 1.4)};
        else
            p = {rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(1, 20), rng.uniform(1, 20)};
        const double o = iou_formula(p, gt);
        const auto s = select_regions(std::vector<Box>{p}, gt, {});
        mismatches += s.positives.size() != (o > 0.5 ? 1u : 0u);
        mismatches += s.negatives.size() != (o < 0.35 ? 1u : 0u);
        mismatches += s.regression.size() != (o > 0.35 ? 1u : 0u);
    }
    const double seventh = iou(Box{0, 0, 2, 2}, Box{1, 1, 2, 2});
    report(4, mismatches == 0 && std::abs(seventh - 1.0 / 7.0) < 1e-15,
           fmt("1000 random pairs, %zu label mismatches; corners (0,0,2,2) vs (1,1,3,3) give IOU %.15f", mismatches, seventh));
}

// 5 --------------------------------------------------------------------

std::vector<SamplePool> overfit_pools()
{
    return {make_domain("aflw", parse_role("aflw"), 48, 11), make_domain("casia", parse_role("casia"), 32, 12),
            make_domain("morph", parse_role("morph"), 24, 13), make_domain("celeba", parse_role("celeba"), 24, 14)};
}

Model overfit(const std::vector<SamplePool>& pools, const fs::path& config, const fs::path& out, int threads)
{
    TrainConfig cfg = TrainConfig::load(config);
    cfg.threads = threads;
    const auto t0 = Clock::now();
    Model model = Model::build(ModelSpec::desk_default(), cfg.seed);
    const double initial = dataset_loss(model, pools, cfg, 0).total;
    Trainer trainer(model, cfg);
    trainer.run(pools, out, [&](std::uint64_t it, const BatchLoss& b) {
        if (it % 1000 == 0) note(fmt("step %llu batch loss %.4g", static_cast<unsigned long long>(it), b.total));
    });
    const double train_time = seconds_since(t0);
    const double final_loss = dataset_loss(model, pools, cfg, 0).total;
    const auto fit = evaluate(model, pools, "fit");
    const double total_time = seconds_since(t0);
    const auto& s = fit.scalars;

    std::size_t samples = 0;
    for (const auto& p : pools) samples += p.samples.size();
    const bool pass = model.parameter_count() <= 300000 && samples == 128 && cfg.steps <= 5000 && total_time < 600.0 &&
                      s.at("detection_positive_accuracy") >= 95.0 && s.at("detection_negative_accuracy") >= 95.0 &&
                      s.at("gender_accuracy") >= 95.0 && s.at("smile_accuracy") >= 95.0 && s.at("nme") <= 5.0 && s.at("age_mae") <= 2.0 &&
                      s.at("rank1") == 100.0 && s.at("gallery_identities") == 8.0 && final_loss < 0.1 * initial;
    report(5, pass,
           fmt("%zu params, %zu samples, %llu steps, %.0f s (training %.0f s)", model.parameter_count(), samples,
               static_cast<unsigned long long>(cfg.steps), total_time, train_time));
    note(fmt("detection accuracy: positives %.2f%%, negatives %.2f%%", s.at("detection_positive_accuracy"),
             s.at("detection_negative_accuracy")));
    note(fmt("gender %.2f%%, smile %.2f%%, NME %.3f%%, age MAE %.3f, rank-1 %.1f%% over %.0f identities", s.at("gender_accuracy"),
             s.at("smile_accuracy"), s.at("nme"), s.at("age_mae"), s.at("rank1"), s.at("gallery_identities")));
    note(fmt("total loss %.4g -> %.4g (%.2f%% of initial)", initial, final_loss, 100.0 * final_loss / initial));
    return model;
}

// 6 --------------------------------------------------------------------

void metric_oracles()
{
    using namespace oracle;
    double worst_nme = 0, worst_iou = 0, worst_ap = 0, worst_tar = 0, worst_cmc = 0;

    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + rng.below(21);
        const auto pred = random_points(rng, k), gt = random_points(rng, k);
        std::vector<double> vis(k);
        for (auto& v : vis) v = rng.below(3) ? 1.0 : 0.0;
        vis[rng.below(k)] = 1.0;
        const Box box{rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(5, 60), rng.uniform(5, 60)};
        worst_nme = std::max(worst_nme, std::abs(nme(pred, gt, box, vis) - nme_oracle(pred, gt, box, vis)));
    }
    for (int trial = 0; trial < 100; ++trial) {
        auto draw = [&] {
            return Box{static_cast<double>(rng.below(12)), static_cast<double>(rng.below(12)), static_cast<double>(1 + rng.below(9)),
                       static_cast<double>(1 + rng.below(9))};
        };
        const Box a = draw(), b = draw();
        worst_iou = std::max(worst_iou, std::abs(iou(a, b) - iou_by_cells(a, b)));
    }
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t images = 1 + rng.below(3);
        std::vector<std::vector<ScoredBox>> dets(images);
        std::vector<std::vector<Box>> gts(images);
        std::size_t budget = 1 + rng.below(5);
        for (std::size_t i = 0; i < images; ++i) {
            for (std::size_t k = 0, n = rng.below(3); k < n; ++k) gts[i].push_back(random_box(rng));
            for (std::size_t k = 0, n = std::min<std::size_t>(budget, rng.below(4)); k < n; ++k, --budget)
                dets[i].push_back({random_box(rng), static_cast<double>(rng.below(4)) / 4.0});
        }
        worst_ap = std::max(worst_ap, std::abs(precision_recall(dets, gts, 0.5).average_precision - ap_oracle(dets, gts, 0.5)));
    }
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(15);
        std::vector<VerificationPair> pairs;
        for (std::size_t i = 0; i < n; ++i) pairs.push_back({static_cast<double>(rng.below(8)) / 7.0, rng.below(2) == 1});
        pairs[0].same = true;
        pairs[1].same = false;
        std::vector<double> fars{0.0};
        for (int k = 0; k < 6; ++k) fars.push_back(rng.uniform());
        std::sort(fars.begin(), fars.end());
        const auto roc = roc_tar_at_far(pairs, fars);
        for (std::size_t k = 0; k < fars.size(); ++k) worst_tar = std::max(worst_tar, std::abs(roc.tar[k] - tar_oracle(pairs, fars[k])));
    }
    for (int trial = 0; trial < 100; ++trial) {
        auto draw = [&](std::size_t n) {
            std::vector<Labeled> out(n);
            for (auto& e : out) {
                e.descriptor = {static_cast<double>(rng.below(3)) - 1.0, static_cast<double>(rng.below(3)) - 1.0, 1.0};
                e.label = static_cast<int>(rng.below(5));
            }
            return out;
        };
        const auto gallery = draw(1 + rng.below(6)), probes = draw(1 + rng.below(6));
        const std::vector<int> ks{1, 2, 3, 5};
        const auto cmc = cmc_rank_k(probes, gallery, ks);
        for (std::size_t k = 0; k < ks.size(); ++k) worst_cmc = std::max(worst_cmc, std::abs(cmc[k] - cmc_oracle(probes, gallery, ks[k])));
    }
    const double worst = std::max({worst_nme, worst_iou, worst_ap, worst_tar, worst_cmc});
    report(6, worst <= 1e-9,
           fmt("100 instances each, max deviation: nme %.1e, iou %.1e, AP %.1e, TAR %.1e, CMC %.1e", worst_nme, worst_iou, worst_ap,
               worst_tar, worst_cmc));
}

// 7 --------------------------------------------------------------------

struct AlignmentStats {
    int faces = 0;
    int missed = 0;
    double mean = 0.0;
    double worst = 0.0;
    double floor = 0.0;
};

// Frontal training faces re-rendered; ground truth mapped through the
// transform estimated from the detected landmarks, compared with the
// template in patch pixels.
AlignmentStats alignment_on_detections(const Model& model)
{
    const auto canonical = CanonicalTemplate::synthetic(model.spec().input_size);
    PipelineConfig cfg;
    AlignmentStats st;
    for (std::size_t i = 0; i < 24; ++i) {
        FaceParams f = draw_face(parse_role("aflw"), i, 11, DomainOptions{});
        f.yaw = f.pitch = 0.0;
        const Scene scene = render(f, 64, 64, 0.02, 3000 + i);
        const auto records = detect_and_analyze(model, scene.image, cfg);
        if (records.size() != 1) {
            ++st.missed;
            continue;
        }
        const auto& gt = scene.faces[0];
        FaceRecord truth;
        truth.landmarks = gt.landmarks;
        truth.visibility = gt.visibility;
        const auto detected = alignment_transform(records[0], canonical, cfg.visibility_threshold).inverse();
        const auto ideal = alignment_transform(truth, canonical, cfg.visibility_threshold).inverse();
        const auto points = to_points(gt.landmarks);
        double err = 0.0, floor = 0.0;
        for (std::size_t k = 0; k < points.size(); ++k) {
            const Point want{canonical.points[k].x * canonical.size, canonical.points[k].y * canonical.size};
            const Point got = detected.apply(points[k]), best = ideal.apply(points[k]);
            err += std::hypot(got.x - want.x, got.y - want.y);
            floor += std::hypot(best.x - want.x, best.y - want.y);
        }
        err /= static_cast<double>(points.size());
        st.mean += err;
        st.floor += floor / static_cast<double>(points.size());
        st.worst = std::max(st.worst, err);
        ++st.faces;
    }
    if (st.faces > 0) {
        st.mean /= st.faces;
        st.floor /= st.faces;
    }
    return st;
}

void similarity_and_alignment(const Model& model)
{
    Rng rng(77);
    double residual = 0.0, param = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Similarity t{rng.uniform(0.5, 2.0), rng.uniform(-std::numbers::pi, std::numbers::pi), rng.uniform(-50, 50),
                           rng.uniform(-50, 50)};
        const std::size_t k = 2 + rng.below(20);
        std::vector<Point> src, dst;
        for (std::size_t i = 0; i < k; ++i) {
            src.push_back({rng.uniform(-20, 20), rng.uniform(-20, 20)});
            dst.push_back(t.apply(src.back()));
        }
        const auto est = estimate_similarity(src, dst, std::vector<double>(k, 1.0));
        for (std::size_t i = 0; i < k; ++i) {
            const Point p = est.apply(src[i]);
            residual = std::max(residual, std::hypot(p.x - dst[i].x, p.y - dst[i].y));
        }
        const double dtheta = std::remainder(est.theta - t.theta, 2 * std::numbers::pi);
        param = std::max({param, std::abs(est.scale - t.scale), std::abs(dtheta), std::abs(est.tx - t.tx), std::abs(est.ty - t.ty)});
    }
    const auto st = alignment_on_detections(model);
    report(7, residual < 1e-9 && param < 1e-9 && st.missed == 0 && st.mean < 1.0,
           fmt("similarity residual %.1e, parameter error %.1e; alignment on %d detections: mean %.3f px, worst face %.3f px", residual,
               param, st.faces, st.mean, st.worst));
    note(fmt("alignment from ground-truth landmarks leaves %.3f px (template mismatch); %d faces missed", st.floor, st.missed));
}

// 8 --------------------------------------------------------------------

FaceRecord random_record(Rng& rng)
{
    const double cx = rng.uniform(0, 60), cy = rng.uniform(0, 60), s = rng.uniform(4, 20);
    FaceRecord r;
    for (const auto& p : canonical_constellation()) {
        r.landmarks.push_back(cx + s * (p.x - 0.5) + rng.uniform(-1, 1));
        r.landmarks.push_back(cy + s * (p.y - 0.5) + rng.uniform(-1, 1));
    }
    r.visibility.assign(5, 1.0);
    r.box = {cx - s / 2, cy - s / 2, s, s};
    r.score = rng.uniform(0.5, 1.0);
    r.pose = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-1, 1)};
    return r;
}

double landmark_box_iou(const FaceRecord& a, const FaceRecord& b)
{
    return iou(bounding_box(to_points(a.landmarks)), bounding_box(to_points(b.landmarks)));
}

// Two faces side by side; returns how many ground-truth faces are matched by
// exactly one record with box IOU > 0.5, and the record count.
std::pair<int, std::size_t> two_face_scene(const Model& model, const FaceParams& a, const FaceParams& b, std::uint64_t seed)
{
    const FaceParams faces[] = {a, b};
    const Scene scene = render_scene(faces, 128, 64, 0.02, seed);
    const auto records = detect_and_analyze(model, scene.image, PipelineConfig{});
    int matched = 0;
    for (const auto& gt : scene.faces) {
        int hits = 0;
        for (const auto& r : records) hits += iou(r.box, *gt.box) > 0.5;
        matched += hits == 1;
    }
    return {matched, records.size()};
}

void pipeline_properties(const Model& model)
{
    Rng rng(78);
    bool idempotent = true, separated = true;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FaceRecord> records;
        const auto n = 1 + rng.below(10);
        for (std::size_t i = 0; i < n; ++i) records.push_back(random_record(rng));
        const double thresh = rng.uniform(0.05, 0.7);
        const auto once = landmarks_nms(records, thresh);
        idempotent = idempotent && landmarks_nms(once, thresh) == once;
        for (std::size_t i = 0; i < once.size(); ++i)
            for (std::size_t j = i + 1; j < once.size(); ++j) separated = separated && landmark_box_iou(once[i], once[j]) <= thresh;
    }

    double pool_dev = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::pair<std::string, std::vector<double>>> items;
        for (std::size_t i = 0, n = 1 + rng.below(8); i < n; ++i) {
            std::vector<double> d(8);
            for (double& v : d) v = rng.uniform(-1, 1);
            items.push_back({"m" + std::to_string(rng.below(3)), d});
        }
        auto doubled = items;
        for (const auto& it : items)
            if (it.first == items[0].first) doubled.push_back(it);
        const auto base = media_pool(items), dup = media_pool(doubled);
        for (std::size_t k = 0; k < base.size(); ++k) pool_dev = std::max(pool_dev, std::abs(base[k] - dup[k]));
    }

    double norm_dev = 0.0;
    const auto size = static_cast<std::size_t>(model.spec().input_size);
    for (int trial = 0; trial < 20; ++trial) {
        const auto d = descriptor(model, test::random_tensor(rng, {1, 1, size, size}, 0.0, 1.0));
        double n = 0.0;
        for (double v : d) n += v * v;
        norm_dev = std::max(norm_dev, std::abs(std::sqrt(n) - 1.0));
    }

    FaceParams left = draw_face(parse_role("aflw"), 0, 11, DomainOptions{});
    FaceParams right = draw_face(parse_role("aflw"), 1, 11, DomainOptions{});
    left.cx = 32, left.cy = 32, left.size = 32;
    right.cx = 96, right.cy = 32, right.size = 32;
    const auto [matched, count] = two_face_scene(model, left, right, 4242);

    report(8, idempotent && separated && pool_dev <= 1e-12 && norm_dev <= 1e-12 && matched == 2 && count == 2,
           fmt("NMS idempotent: %s, separated: %s; media pool duplication deviation %.1e; descriptor norm deviation %.1e; "
               "two-face image: %zu records, %d faces matched",
               idempotent ? "yes" : "no", separated ? "yes" : "no", pool_dev, norm_dev, count, matched));

    int exact = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        FaceParams a = draw_face(parse_role("aflw"), s, 500, DomainOptions{});
        FaceParams b = draw_face(parse_role("aflw"), s, 501, DomainOptions{});
        a.cx = 32, a.cy = 32;
        b.cx = 96, b.cy = 32;
        const auto [m, c] = two_face_scene(model, a, b, 9000 + s);
        exact += m == 2 && c == 2;
    }
    note(fmt("novel two-face images with exactly two matched records: %d of 20", exact));
}

// Mean landmark error after each refinement round, from a shifted box.
void refinement_rounds(const Model& model)
{
    PipelineConfig cfg;
    std::vector<double> err(4, 0.0);
    int n = 0;
    for (std::size_t i = 0; i < 24; ++i) {
        FaceParams f = draw_face(parse_role("aflw"), i, 11, DomainOptions{});
        f.cx = f.cy = 32;
        const Scene scene = render(f, 64, 64, 0.02, 5000 + i);
        const Image gray = to_gray(scene.image);
        const Box& gt = *scene.faces[0].box;
        const Box start{gt.x + 0.2 * gt.w, gt.y - 0.15 * gt.h, gt.w * 1.1, gt.h * 1.1};
        const Box regions[] = {start};
        FaceRecord r = record_from_region(start, evaluate_regions(model, gray, regions, 1)[0]);
        const auto truth = to_points(scene.faces[0].landmarks);
        for (int round = 0; round < 4; ++round) {
            if (round > 0) r = iterative_region_proposals(model, r, gray, 1, cfg);
            err[static_cast<std::size_t>(round)] += nme(to_points(r.landmarks), truth, gt, scene.faces[0].visibility);
        }
        ++n;
    }
    std::string line = "region refinement from shifted boxes, mean NME by round:";
    for (double e : err) line += fmt(" %.2f", e / n);
    note(line);
}

// 9 --------------------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) {
            std::ifstream in(e.path(), std::ios::binary);
            files[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
        }
    return files;
}

int cli_run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    return cli::run(args, out, err);
}

void determinism(const fs::path& work)
{
    fs::remove_all(work);
    std::vector<std::string> data;
    bool synth_ok = true;
    for (const auto* role : {"aflw", "casia", "morph", "celeba"}) {
        const auto a = work / "data_a" / role, b = work / "data_b" / role;
        synth_ok = synth_ok && cli_run({"synth", "--role", role, "--n", "8", "--seed", "9", "--out", a.string()}) == 0 &&
                   cli_run({"synth", "--role", role, "--n", "8", "--seed", "9", "--out", b.string()}) == 0;
        data.push_back(a.string());
    }
    const bool synth_same = synth_ok && tree(work / "data_a") == tree(work / "data_b");

    std::ofstream(work / "train.json") << R"({"steps": 20, "batch_per_domain": 2, "learning_rate": 0.002, "clip_norm": 10,
        "weights": {"landmarks": 10, "age": 0.05}, "checkpoint_every": 10, "threads": 2})";
    auto train = [&](const std::string& out) {
        std::vector<std::string> a{"train", "--config", (work / "train.json").string(), "--seed", "3", "--out", (work / out).string(),
                                   "--data"};
        a.insert(a.end(), data.begin(), data.end());
        return cli_run(a) == 0;
    };
    const bool trained = train("run_a") && train("run_b");
    const auto a = trained ? tree(work / "run_a") : decltype(tree(work)){};
    const bool train_same = trained && a == tree(work / "run_b") && a.contains("final.ckpt");
    report(9, synth_same && train_same,
           fmt("synth reruns byte-identical: %s; two 20-step training runs (%zu files) bit-identical: %s", synth_same ? "yes" : "no",
               a.size(), train_same ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Acceptance run"};
    std::string config = std::string(A1O_SOURCE_DIR) + "/configs/overfit_train.json";
    std::string out = (fs::temp_directory_path() / "a1o_acceptance").string();
    int threads = 1;
    app.add_option("--config", config, "Overfit training config")->check(CLI::ExistingFile);
    app.add_option("--out", out, "Working directory (the overfit checkpoint is kept there)");
    app.add_option("--threads", threads, "Worker threads for training")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    fs::create_directories(out);
    gradient_suite();
    mtl_decomposition();
    age_loss_behavior();
    iou_gating();
    const auto pools = overfit_pools();
    const Model model = overfit(pools, config, fs::path(out) / "overfit", threads);
    metric_oracles();
    similarity_and_alignment(model);
    pipeline_properties(model);
    refinement_rounds(model);
    determinism(fs::path(out) / "determinism");

    std::cout << (failures == 0 ? "all criteria passed" : fmt("%d of 9 criteria failed", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
