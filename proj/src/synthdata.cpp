// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/synthdata.hpp"

#include "a1o/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace a1o {

namespace {

struct Vec3 {
    double x, y, z;
};

double dist2(const Vec3& a, const Vec3& b)
{
    return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z);
}

// Row-major 3x3 rotation Rz(roll) * Ry(yaw) * Rx(pitch).
struct Rotation {
    double m[3][3];

    Rotation(double roll, double pitch, double yaw)
    {
        const double cr = std::cos(roll), sr = std::sin(roll);
        const double cp = std::cos(pitch), sp = std::sin(pitch);
        const double cy = std::cos(yaw), sy = std::sin(yaw);
        const double rz[3][3] = {{cr, -sr, 0}, {sr, cr, 0}, {0, 0, 1}};
        const double ry[3][3] = {{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}};
        const double rx[3][3] = {{1, 0, 0}, {0, cp, -sp}, {0, sp, cp}};
        double t[3][3]{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k) t[i][j] += ry[i][k] * rx[k][j];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                m[i][j] = 0.0;
                for (int k = 0; k < 3; ++k) m[i][j] += rz[i][k] * t[k][j];
            }
    }
    Vec3 apply(const Vec3& v) const
    {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z, m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    Vec3 apply_transpose(const Vec3& v) const
    {
        return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z, m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
                m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
    }
};

// Constellation on the unit face disc, y pointing down.
constexpr std::array<Point, kSynthLandmarks> kBase{{{-0.36, -0.22}, {0.36, -0.22}, {0.0, 0.10}, {-0.30, 0.42}, {0.30, 0.42}}};

struct IdentityTraits {
    double eye_dx, eye_dy, nose_dy, mouth_dx, mouth_dy;
    double hair_line, hair_tone;
    double mark_x, mark_y, mark_radius, mark_depth;
    int gender;
};

IdentityTraits traits_of(int identity)
{
    Rng rng(derive_seed(0x1d5eedULL, static_cast<std::uint64_t>(identity)));
    IdentityTraits t;
    t.eye_dx = rng.uniform(-0.04, 0.04);
    t.eye_dy = rng.uniform(-0.04, 0.04);
    t.nose_dy = rng.uniform(-0.05, 0.05);
    t.mouth_dx = rng.uniform(-0.04, 0.04);
    t.mouth_dy = rng.uniform(-0.04, 0.04);
    t.hair_line = rng.uniform(-0.78, -0.45);
    t.hair_tone = rng.uniform(0.05, 0.35);
    t.mark_x = rng.uniform(0.35, 0.6);
    t.mark_y = rng.uniform(-0.05, 0.3);
    t.mark_radius = rng.uniform(0.07, 0.13);
    t.mark_depth = rng.uniform(0.15, 0.35);
    t.gender = static_cast<int>(rng.below(2));
    return t;
}

std::array<Point, kSynthLandmarks> constellation(const FaceParams& p, const IdentityTraits& t)
{
    auto pts = kBase;
    pts[0].x -= t.eye_dx;
    pts[1].x += t.eye_dx;
    pts[0].y += t.eye_dy;
    pts[1].y += t.eye_dy;
    pts[2].y += t.nose_dy;
    pts[3].x -= t.mouth_dx;
    pts[4].x += t.mouth_dx;
    pts[3].y += t.mouth_dy;
    pts[4].y += t.mouth_dy;
    for (auto& q : pts) {
        if (p.gender == 1) {
            q.x *= 0.92;
            q.y *= 1.04;
        }
    }
    if (p.smile == 1) {
        for (int i : {3, 4}) {
            pts[static_cast<std::size_t>(i)].x *= 1.1;
            pts[static_cast<std::size_t>(i)].y -= 0.05;
        }
    }
    return pts;
}

Vec3 lift(Point p) { return {p.x, p.y, std::sqrt(std::max(0.0, 1.0 - p.x * p.x - p.y * p.y))}; }

struct FaceModel {
    FaceParams p;
    IdentityTraits t;
    Rotation rot;
    std::array<Point, kSynthLandmarks> canon;
    std::array<Vec3, kSynthLandmarks> canon3;
    double skin;

    explicit FaceModel(const FaceParams& params)
        : p(params), t(traits_of(params.identity)), rot(params.roll, params.pitch, params.yaw),
          canon(constellation(params, t)), skin(age_intensity(params.age))
    {
        for (std::size_t i = 0; i < canon.size(); ++i) canon3[i] = lift(canon[i]);
    }

    // Intensity at canonical surface point q seen with camera-facing cosine zc.
    double shade(const Vec3& q, double zc) const
    {
        if (q.z < -0.2 || q.y < t.hair_line) return t.hair_tone;
        const double base = skin * (0.8 + 0.2 * zc);
        if (q.z <= 0.0) return base;
        for (int e : {0, 1})
            if (dist2(q, canon3[static_cast<std::size_t>(e)]) < 0.12 * 0.12) return 0.1;
        if (p.gender == 1) {
            for (int e : {0, 1}) {
                const auto& eye = canon[static_cast<std::size_t>(e)];
                if (std::abs(q.y - (eye.y - 0.17)) < 0.035 && std::abs(q.x - eye.x) < 0.14) return 0.15;
            }
        }
        if (dist2(q, canon3[2]) < 0.08 * 0.08) return base * 0.6;
        const auto& l = canon[3];
        const auto& r = canon[4];
        const double s = (q.x - l.x) / (r.x - l.x);
        if (s >= 0.0 && s <= 1.0) {
            const double sag = p.smile == 1 ? 0.10 : 0.0;
            const double yc = l.y + (r.y - l.y) * s + sag * 4.0 * s * (1.0 - s);
            if (std::abs(q.y - yc) < 0.04) return 0.12;
        }
        for (double side : {-1.0, 1.0}) {
            const Vec3 m = lift({side * t.mark_x, t.mark_y});
            if (dist2(q, m) < t.mark_radius * t.mark_radius) return std::max(0.0, base - t.mark_depth);
        }
        return base;
    }

    // Value at pixel coordinate (u, v), or negative outside the face disc.
    double sample(double u, double v) const
    {
        const double r = 0.5 * p.size;
        const double X = (u - p.cx) / r, Y = (v - p.cy) / r;
        const double d2 = X * X + Y * Y;
        if (d2 >= 1.0) return -1.0;
        const double Z = std::sqrt(1.0 - d2);
        return shade(rot.apply_transpose({X, Y, Z}), Z);
    }

    LabelSet labels() const
    {
        LabelSet l;
        l.present = TaskSet::all();
        const double r = 0.5 * p.size;
        l.box = Box{p.cx - r, p.cy - r, p.size, p.size};
        for (const auto& c : canon3) {
            const Vec3 q = rot.apply(c);
            l.landmarks.push_back(p.cx + r * q.x);
            l.landmarks.push_back(p.cy + r * q.y);
            l.visibility.push_back(q.z > 0.0 ? 1.0 : 0.0);
        }
        l.pose = std::array<double, 3>{p.roll, p.pitch, p.yaw};
        l.gender = p.gender;
        l.smile = p.smile;
        l.age = p.age;
        l.age_sigma = 3.0;
        l.identity = p.identity;
        return l;
    }
};

void paint_background(Image& img, Rng& rng)
{
    const double base = rng.uniform(0.25, 0.6);
    const double gx = rng.uniform(-0.15, 0.15), gy = rng.uniform(-0.15, 0.15);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            img.at(x, y) = base + gx * (x + 0.5) / img.width + gy * (y + 0.5) / img.height;
    const int clutter = 3 + static_cast<int>(rng.below(5));
    for (int k = 0; k < clutter; ++k) {
        const double value = rng.uniform(0.1, 0.9);
        const double w = rng.uniform(3.0, 18.0), h = rng.uniform(3.0, 18.0);
        const double x0 = rng.uniform(-w / 2, img.width - w / 2), y0 = rng.uniform(-h / 2, img.height - h / 2);
        const bool ellipse = rng.below(2) == 1;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const double u = (x + 0.5 - x0) / w, v = (y + 0.5 - y0) / h;
                if (u < 0 || u > 1 || v < 0 || v > 1) continue;
                if (ellipse && (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) > 0.25) continue;
                img.at(x, y) = value;
            }
    }
}

}  // namespace

double age_intensity(double age) { return 0.92 - 0.45 * age / 80.0; }

std::vector<Point> canonical_constellation()
{
    std::vector<Point> pts;
    for (const auto& b : kBase) pts.push_back({0.5 + 0.5 * b.x, 0.5 + 0.5 * b.y});
    return pts;
}

std::vector<double> canonical_depth()
{
    std::vector<double> z;
    for (const auto& b : kBase) z.push_back(lift(b).z);
    return z;
}

std::vector<Point> face_constellation(const FaceParams& face)
{
    std::vector<Point> pts;
    for (const auto& b : constellation(face, traits_of(face.identity))) pts.push_back({0.5 + 0.5 * b.x, 0.5 + 0.5 * b.y});
    return pts;
}

Scene render_scene(std::span<const FaceParams> faces, int width, int height, double noise, std::uint64_t seed)
{
    Scene scene;
    scene.image = Image(width, height);
    Rng rng(seed);
    paint_background(scene.image, rng);

    std::vector<FaceModel> models;
    for (const auto& f : faces) {
        if (!(f.size > 0.0)) throw GenerationError("face size must be positive");
        models.emplace_back(f);
        scene.faces.push_back(models.back().labels());
        const auto& lm = scene.faces.back().landmarks;
        for (std::size_t i = 0; i < lm.size(); i += 2)
            if (lm[i] < 0.0 || lm[i] > width || lm[i + 1] < 0.0 || lm[i + 1] > height)
                throw GenerationError("landmark " + std::to_string(i / 2) + " leaves the canvas");
    }

    // 2x2 supersampling; background shows through where no face covers a subsample.
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int sy = 0; sy < 2; ++sy)
                for (int sx = 0; sx < 2; ++sx) {
                    const double u = x + 0.25 + 0.5 * sx, v = y + 0.25 + 0.5 * sy;
                    double value = scene.image.at(x, y);
                    for (const auto& m : models) {
                        const double s = m.sample(u, v);
                        if (s >= 0.0) value = s;
                    }
                    acc += value;
                }
            scene.image.at(x, y) = acc / 4.0;
        }
    if (noise > 0.0)
        for (auto& v : scene.image.data) v += noise * rng.normal();
    quantize8(scene.image);
    return scene;
}

Scene render(const FaceParams& face, int width, int height, double noise, std::uint64_t seed)
{
    return render_scene(std::span<const FaceParams>(&face, 1), width, height, noise, seed);
}

TaskSet parse_role(const std::string& role)
{
    using enum Task;
    if (role == "aflw") return {Detection, Landmarks, Visibility, Pose};
    if (role == "casia") return {Identity, Gender};
    if (role == "morph" || role == "imdb_wiki") return {Age, Gender};
    if (role == "adience") return {Age};
    if (role == "celeba") return {Smile, Gender};
    TaskSet out;
    std::stringstream ss(role);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = task_from_name(item);
        if (!t) throw ConfigError("unknown role or task name '" + item + "'");
        out.insert(*t);
    }
    if (out.empty()) throw ConfigError("empty role");
    return out;
}

FaceParams draw_face(TaskSet role, std::size_t index, std::uint64_t seed, const DomainOptions& opt)
{
    Rng rng(derive_seed(seed, index));
    FaceParams f;
    const int ids = std::max(1, opt.identities);
    f.identity = opt.identity_offset + static_cast<int>(index % static_cast<std::size_t>(ids));
    f.age = rng.uniform(2.0, 78.0);
    const int random_gender = static_cast<int>(rng.below(2));
    f.gender = role.contains(Task::Identity) ? traits_of(f.identity).gender : random_gender;
    f.smile = static_cast<int>(rng.below(2));
    if (role.contains(Task::Detection)) {
        f.size = rng.uniform(opt.min_face, opt.max_face);
        const double r = 0.5 * f.size, margin = r + 1.0;
        f.cx = rng.uniform(margin, opt.canvas - margin);
        f.cy = rng.uniform(margin, opt.canvas - margin);
        f.roll = rng.uniform(-opt.max_roll, opt.max_roll);
        f.pitch = rng.uniform(-opt.max_pitch, opt.max_pitch);
        f.yaw = rng.uniform(-opt.max_yaw, opt.max_yaw);
    } else {
        f.size = opt.patch;
        f.cx = f.cy = 0.5 * opt.patch;
    }
    return f;
}

SamplePool make_domain(const std::string& name, TaskSet role, std::size_t n, std::uint64_t seed, const DomainOptions& opt)
{
    SamplePool pool;
    pool.name = name;
    pool.role = role;
    const bool detection = role.contains(Task::Detection);
    const int extent = detection ? opt.canvas : opt.patch;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t image_seed = derive_seed(seed, i, 1);
        const auto fi = static_cast<double>(i);
        const bool negative = detection && std::floor((fi + 1) * opt.negative_fraction) > std::floor(fi * opt.negative_fraction);
        Sample s;
        s.domain = name;
        if (negative) {
            s.image = render_scene({}, extent, extent, opt.noise, image_seed).image;
            s.labels.present = {Task::Detection};
        } else {
            auto scene = render(draw_face(role, i, seed, opt), extent, extent, opt.noise, image_seed);
            s.image = std::move(scene.image);
            s.labels = std::move(scene.faces[0]);
            s.labels.restrict_to(role);
        }
        pool.samples.push_back(std::move(s));
    }
    return pool;
}

namespace {

nlohmann::json labels_to_json(const LabelSet& l)
{
    nlohmann::json j;
    std::vector<std::string> present;
    for (Task t : l.present.list()) present.emplace_back(task_name(t));
    j["present"] = present;
    if (l.box) j["box"] = {l.box->x, l.box->y, l.box->w, l.box->h};
    if (!l.landmarks.empty()) j["landmarks"] = l.landmarks;
    if (!l.visibility.empty()) j["visibility"] = l.visibility;
    if (l.pose) j["pose"] = *l.pose;
    if (l.gender) j["gender"] = *l.gender;
    if (l.smile) j["smile"] = *l.smile;
    if (l.age) j["age"] = *l.age;
    if (l.age_sigma) j["age_sigma"] = *l.age_sigma;
    if (l.identity) j["identity"] = *l.identity;
    return j;
}

std::string image_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "images/%04zu.pgm", i);
    return buf;
}

}  // namespace

void write_pool(const std::filesystem::path& dir, const SamplePool& pool)
{
    std::filesystem::create_directories(dir / "images");
    std::ofstream out(dir / "manifest.jsonl", std::ios::binary);
    if (!out) throw FormatError("cannot write manifest in " + dir.string());
    for (std::size_t i = 0; i < pool.samples.size(); ++i) {
        const auto& s = pool.samples[i];
        const auto name = image_name(i);
        write_pnm(dir / name, s.image);
        auto j = labels_to_json(s.labels);
        j["image"] = name;
        j["domain"] = s.domain;
        out << j.dump() << '\n';
    }
}

SamplePool read_pool(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "manifest.jsonl");
    if (!in) throw FormatError("cannot open " + (dir / "manifest.jsonl").string());
    SamplePool pool;
    pool.name = dir.filename().string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "manifest line " + std::to_string(lineno);
        Sample s;
        try {
            const auto j = nlohmann::json::parse(line);
            if (!j.is_object()) throw FormatError(where + ": expected an object");
            for (const auto& [key, _] : j.items()) {
                static const std::vector<std::string> known{"image", "domain", "present", "box", "landmarks", "visibility",
                                                            "pose", "gender", "smile", "age", "age_sigma", "identity"};
                if (std::find(known.begin(), known.end(), key) == known.end())
                    throw FormatError(where + ": unknown field '" + key + "'");
            }
            auto& l = s.labels;
            for (const auto& name : j.at("present").get<std::vector<std::string>>()) {
                const auto t = task_from_name(name);
                if (!t) throw FormatError(where + ": unknown task '" + name + "'");
                l.present.insert(*t);
            }
            if (j.contains("box")) {
                const auto b = j["box"].get<std::vector<double>>();
                if (b.size() != 4) throw FormatError(where + ": box needs 4 numbers");
                l.box = Box{b[0], b[1], b[2], b[3]};
            }
            if (j.contains("landmarks")) l.landmarks = j["landmarks"].get<std::vector<double>>();
            if (j.contains("visibility")) l.visibility = j["visibility"].get<std::vector<double>>();
            if (j.contains("pose")) l.pose = j["pose"].get<std::array<double, 3>>();
            if (j.contains("gender")) l.gender = j["gender"].get<int>();
            if (j.contains("smile")) l.smile = j["smile"].get<int>();
            if (j.contains("age")) l.age = j["age"].get<double>();
            if (j.contains("age_sigma")) l.age_sigma = j["age_sigma"].get<double>();
            if (j.contains("identity")) l.identity = j["identity"].get<int>();
            s.domain = j.at("domain").get<std::string>();
            s.image = read_pnm(dir / j.at("image").get<std::string>());
            l.validate();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(where + ": " + e.what());
        } catch (const ContractError& e) {
            throw FormatError(where + ": " + e.what());
        }
        pool.role = pool.role | s.labels.present;
        pool.samples.push_back(std::move(s));
    }
    return pool;
}

}  // namespace a1o
