// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/trainer.hpp"

#include "a1o/checkpoint.hpp"
#include "a1o/ops.hpp"
#include "a1o/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace a1o {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
{
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown " + where + " field '" + key + "'");
}

template <typename T>
void read_field(const json& j, const char* key, T& out)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("train config field '") + key + "' has the wrong type");
    }
}

}  // namespace

void TrainConfig::validate() const
{
    auto fail = [](const std::string& field, const std::string& rule) { throw ConfigError(field + " " + rule); };
    if (batch_per_domain < 1) fail("batch_per_domain", "must be at least 1");
    for (const auto& [d, q] : quotas)
        if (q < 0) fail("quotas." + d, "must be non-negative");
    if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must lie in [0, 1)");
    if (!(lr_gamma > 0.0)) fail("lr_gamma", "must be positive");
    if (!(clip_norm >= 0.0)) fail("clip_norm", "must be non-negative");
    weights.validate();
    if (!(age.sigma > 0.0)) fail("age.sigma", "must be positive");
    if (!(0.0 <= iou.negative && iou.negative <= iou.positive && iou.positive <= 1.0))
        fail("iou", "thresholds must satisfy 0 <= negative <= positive <= 1");
    if (!(iou.regression >= 0.0 && iou.regression <= 1.0)) fail("iou.regression", "must lie in [0, 1]");
    if (threads < 1) fail("threads", "must be at least 1");
    if (positives_per_face < 1) fail("positives_per_face", "must be at least 1");
    if (!(negatives_per_positive >= 0.0)) fail("negatives_per_positive", "must be non-negative");
    if (dead_zone_per_face < 0) fail("dead_zone_per_face", "must be non-negative");
    if (proposal_scales.empty()) fail("proposal_scales", "must not be empty");
    for (double s : proposal_scales)
        if (!(s > 0.0)) fail("proposal_scales", "must be positive");
    if (!(proposal_stride > 0.0)) fail("proposal_stride", "must be positive");
    if (log_every < 1) fail("log_every", "must be at least 1");
}

int TrainConfig::quota(const std::string& domain) const
{
    const auto it = quotas.find(domain);
    return it == quotas.end() ? batch_per_domain : it->second;
}

double TrainConfig::learning_rate_at(std::uint64_t iteration) const
{
    if (lr_step == 0) return learning_rate;
    return learning_rate * std::pow(lr_gamma, static_cast<double>(iteration / lr_step));
}

TrainConfig TrainConfig::from_json(const json& j)
{
    reject_unknown(j,
                   {"steps", "batch_per_domain", "quotas", "learning_rate", "momentum", "lr_step", "lr_gamma", "clip_norm",
                    "weights", "age", "iou", "seed", "threads", "positives_per_face", "negatives_per_positive",
                    "dead_zone_per_face", "proposal_scales", "proposal_stride", "checkpoint_every", "log_every"},
                   "train config");
    TrainConfig c;
    read_field(j, "steps", c.steps);
    read_field(j, "batch_per_domain", c.batch_per_domain);
    read_field(j, "quotas", c.quotas);
    read_field(j, "learning_rate", c.learning_rate);
    read_field(j, "momentum", c.momentum);
    read_field(j, "lr_step", c.lr_step);
    read_field(j, "lr_gamma", c.lr_gamma);
    read_field(j, "clip_norm", c.clip_norm);
    read_field(j, "seed", c.seed);
    read_field(j, "threads", c.threads);
    read_field(j, "positives_per_face", c.positives_per_face);
    read_field(j, "negatives_per_positive", c.negatives_per_positive);
    read_field(j, "dead_zone_per_face", c.dead_zone_per_face);
    read_field(j, "proposal_scales", c.proposal_scales);
    read_field(j, "proposal_stride", c.proposal_stride);
    read_field(j, "checkpoint_every", c.checkpoint_every);
    read_field(j, "log_every", c.log_every);
    if (j.contains("weights")) {
        const auto& w = j["weights"];
        if (!w.is_object()) throw ConfigError("train config field 'weights' must be an object");
        for (const auto& [name, value] : w.items()) {
            const auto t = task_from_name(name);
            if (!t) throw ConfigError("unknown task '" + name + "' in weights");
            if (!value.is_number()) throw ConfigError("weight for '" + name + "' must be a number");
            c.weights[*t] = value.get<double>();
        }
    }
    if (j.contains("age")) {
        const auto& a = j["age"];
        reject_unknown(a, {"sigma", "switch_iteration", "linear_ramp"}, "age");
        read_field(a, "sigma", c.age.sigma);
        read_field(a, "switch_iteration", c.age.switch_iteration);
        read_field(a, "linear_ramp", c.age.linear_ramp);
    }
    if (j.contains("iou")) {
        const auto& i = j["iou"];
        reject_unknown(i, {"positive", "negative", "regression"}, "iou");
        read_field(i, "positive", c.iou.positive);
        read_field(i, "negative", c.iou.negative);
        read_field(i, "regression", c.iou.regression);
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open train config " + file.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

json TrainConfig::to_json() const
{
    json w = json::object();
    for (Task t : kAllTasks) w[std::string(task_name(t))] = weights[t];
    return {
        {"steps", steps},
        {"batch_per_domain", batch_per_domain},
        {"quotas", quotas},
        {"learning_rate", learning_rate},
        {"momentum", momentum},
        {"lr_step", lr_step},
        {"lr_gamma", lr_gamma},
        {"clip_norm", clip_norm},
        {"weights", w},
        {"age", {{"sigma", age.sigma}, {"switch_iteration", age.switch_iteration}, {"linear_ramp", age.linear_ramp}}},
        {"iou", {{"positive", iou.positive}, {"negative", iou.negative}, {"regression", iou.regression}}},
        {"seed", seed},
        {"threads", threads},
        {"positives_per_face", positives_per_face},
        {"negatives_per_positive", negatives_per_positive},
        {"dead_zone_per_face", dead_zone_per_face},
        {"proposal_scales", proposal_scales},
        {"proposal_stride", proposal_stride},
        {"checkpoint_every", checkpoint_every},
        {"log_every", log_every},
    };
}

RegionSelection select_regions(std::span<const Box> proposals, const Box& gt, const IouThresholds& th)
{
    if (!(gt.w > 0.0 && gt.h > 0.0)) throw ContractError("select_regions: ground-truth box must have positive area");
    RegionSelection s;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        const double o = iou(proposals[i], gt);
        if (o > th.positive) s.positives.push_back(i);
        if (o < th.negative) s.negatives.push_back(i);
        if (o > th.regression) s.regression.push_back(i);
    }
    return s;
}

std::vector<BatchItem> sample_minibatch(std::span<const SamplePool> pools, const TrainConfig& cfg, std::uint64_t iteration)
{
    Rng rng(derive_seed(cfg.seed, iteration, 0xba7c));
    std::vector<std::vector<std::size_t>> picks(pools.size());
    int rounds = 0;
    for (std::size_t p = 0; p < pools.size(); ++p) {
        const int q = cfg.quota(pools[p].name);
        if (q == 0) continue;
        const std::size_t n = pools[p].samples.size();
        if (n == 0) throw ConfigError("domain '" + pools[p].name + "' has no samples");
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (int k = 0; k < q; ++k) {
            const std::size_t slot = static_cast<std::size_t>(k) % n;
            // Partial Fisher-Yates; wraps around when the quota exceeds the pool.
            const std::size_t j = slot + static_cast<std::size_t>(rng.below(n - slot));
            std::swap(order[slot], order[j]);
            picks[p].push_back(order[slot]);
        }
        rounds = std::max(rounds, q);
    }
    std::vector<BatchItem> batch;
    for (int r = 0; r < rounds; ++r)
        for (std::size_t p = 0; p < pools.size(); ++p)
            if (static_cast<std::size_t>(r) < picks[p].size()) batch.push_back({p, picks[p][static_cast<std::size_t>(r)]});
    return batch;
}

namespace {

// k distinct picks from `from` (all of them if k is larger).
std::vector<std::size_t> choose(std::vector<std::size_t> from, std::size_t k, Rng& rng)
{
    k = std::min(k, from.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(from[i], from[i + rng.below(from.size() - i)]);
    from.resize(k);
    return from;
}

}  // namespace

std::vector<SampleRegions> plan_regions(std::span<const SamplePool> pools, std::span<const BatchItem> batch,
                                        const TrainConfig& cfg, std::uint64_t iteration)
{
    std::vector<SampleRegions> out(batch.size());
    std::vector<std::vector<Box>> negative_pool(batch.size());
    std::size_t positives = 0, detection_samples = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Sample& s = pools[batch[i].pool].samples.at(batch[i].index);
        const Box whole{0, 0, static_cast<double>(s.image.width), static_cast<double>(s.image.height)};
        if (!s.labels.present.contains(Task::Detection)) {
            out[i].rows.push_back({whole, -1, true, true});
            continue;
        }
        ++detection_samples;
        Rng rng(derive_seed(cfg.seed, iteration, i, 0x7e61));
        const auto proposals = grid_proposals(s.image.width, s.image.height, cfg.proposal_scales, cfg.proposal_stride);
        if (!s.labels.box) {
            negative_pool[i] = proposals;
            continue;
        }
        const auto sel = select_regions(proposals, *s.labels.box, cfg.iou);
        // Candidate 0 is the ground truth itself.
        std::vector<Box> candidates{*s.labels.box};
        for (auto k : sel.positives) candidates.push_back(proposals[k]);
        std::vector<std::size_t> idx(candidates.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        for (auto k : choose(idx, static_cast<std::size_t>(cfg.positives_per_face), rng)) {
            out[i].rows.push_back({candidates[k], 1, true, true});
            ++out[i].positives;
        }
        std::vector<std::size_t> dead;
        for (auto k : sel.regression)
            if (!std::binary_search(sel.positives.begin(), sel.positives.end(), k)) dead.push_back(k);
        for (auto k : choose(dead, static_cast<std::size_t>(cfg.dead_zone_per_face), rng))
            out[i].rows.push_back({proposals[k], -1, true, false});
        for (auto k : sel.negatives) negative_pool[i].push_back(proposals[k]);
        positives += out[i].positives;
    }

    const double base = positives > 0 ? static_cast<double>(positives)
                                      : static_cast<double>(cfg.positives_per_face) * static_cast<double>(detection_samples);
    auto wanted = static_cast<std::size_t>(std::llround(cfg.negatives_per_positive * base));
    Rng rng(derive_seed(cfg.seed, iteration, 0x9e9));
    std::vector<std::vector<std::size_t>> remaining(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t k = 0; k < negative_pool[i].size(); ++k) remaining[i].push_back(k);
    bool progress = true;
    while (wanted > 0 && progress) {
        progress = false;
        for (std::size_t i = 0; i < batch.size() && wanted > 0; ++i) {
            auto& r = remaining[i];
            if (r.empty()) continue;
            const std::size_t j = static_cast<std::size_t>(rng.below(r.size()));
            out[i].rows.push_back({negative_pool[i][r[j]], 0, false, false});
            ++out[i].negatives;
            r.erase(r.begin() + static_cast<long>(j));
            --wanted;
            progress = true;
        }
    }
    return out;
}

SampleLoss sample_loss(const Model& model, const Sample& sample, const SampleRegions& regions, const TrainConfig& cfg,
                       const TaskWeights& weights, std::uint64_t iteration)
{
    SampleLoss out;
    const auto& spec = model.spec();
    const auto& labels = sample.labels;
    const std::size_t R = regions.rows.size();
    if (R == 0) return out;
    const auto S = static_cast<std::size_t>(spec.input_size);
    const auto K = static_cast<std::size_t>(spec.landmarks);

    const Image gray = to_gray(sample.image);
    Tensor input(Shape{R, 1, S, S});
    for (std::size_t r = 0; r < R; ++r) {
        const Tensor crop = crop_resize(gray, regions.rows[r].box, spec.input_size);
        std::copy(crop.data().begin(), crop.data().end(), input.mutable_data().begin() + static_cast<long>(r * S * S));
    }

    // Row masks per task; a task enters the graph only if some row uses it.
    std::map<Task, std::vector<double>> mask;
    const TaskSet present = labels.present & spec.tasks();
    for (Task t : present.list()) {
        auto& m = mask[t];
        m.assign(R, 0.0);
        for (std::size_t r = 0; r < R; ++r) {
            const Region& row = regions.rows[r];
            if (t == Task::Detection)
                m[r] = row.detection >= 0 ? 1.0 : 0.0;
            else if (kRegionTasks.contains(t))
                m[r] = row.regression ? 1.0 : 0.0;
            else
                m[r] = row.aligned ? 1.0 : 0.0;
        }
        if (std::all_of(m.begin(), m.end(), [](double v) { return v == 0.0; })) mask.erase(t);
    }
    if (mask.empty()) return out;
    TaskSet tasks;
    for (const auto& [t, _] : mask) tasks.insert(t);

    Graph g;
    const auto nodes = model.forward(g, g.input(input), tasks);
    std::vector<NodeId> terms;
    std::vector<double> term_weights;
    std::vector<Task> term_tasks;
    for (Task t : tasks.list()) {
        const auto& m = mask.at(t);
        const NodeId head = nodes.head.at(t);
        NodeId term = 0;
        switch (t) {
        case Task::Detection: {
            std::vector<std::size_t> cls(R, 0);
            for (std::size_t r = 0; r < R; ++r) cls[r] = regions.rows[r].detection > 0 ? 1 : 0;
            term = losses::softmax_cross_entropy(g, head, cls, m);
            break;
        }
        case Task::Landmarks: {
            if (labels.landmarks.size() != 2 * K) throw DimensionError("sample has the wrong number of landmarks");
            Tensor target(Shape{R, 2 * K}), em(Shape{R, 2 * K});
            for (std::size_t r = 0; r < R; ++r) {
                const auto uv = to_box_units(labels.landmarks, regions.rows[r].box);
                for (std::size_t k = 0; k < 2 * K; ++k) {
                    target[r * 2 * K + k] = uv[k];
                    em[r * 2 * K + k] = m[r];
                }
            }
            term = losses::euclidean(g, head, target, em);
            break;
        }
        case Task::Visibility: {
            if (labels.visibility.size() != K) throw DimensionError("sample has the wrong number of visibility labels");
            std::vector<double> lab(R * K), em(R * K);
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t k = 0; k < K; ++k) {
                    lab[r * K + k] = labels.visibility[k];
                    em[r * K + k] = m[r];
                }
            term = losses::binary_cross_entropy(g, ops::reshape(g, head, {R * K}), lab, em);
            break;
        }
        case Task::Pose: {
            Tensor target(Shape{R, 3}), em(Shape{R, 3});
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t k = 0; k < 3; ++k) {
                    target[r * 3 + k] = (*labels.pose)[k];
                    em[r * 3 + k] = m[r];
                }
            term = losses::euclidean(g, head, target, em);
            break;
        }
        case Task::Gender:
        case Task::Smile: {
            const double y = t == Task::Gender ? *labels.gender : *labels.smile;
            term = losses::binary_cross_entropy(g, head, std::vector<double>(R, y), m);
            break;
        }
        case Task::Age: {
            const double sigma = labels.age_sigma.value_or(cfg.age.sigma);
            term = losses::age(g, head, std::vector<double>(R, *labels.age), std::vector<double>(R, sigma),
                               losses::lambda_schedule(iteration, cfg.age), m);
            break;
        }
        case Task::Identity: {
            const int id = *labels.identity;
            if (id < 0 || id >= spec.identity_classes)
                throw ConfigError("identity label " + std::to_string(id) + " exceeds the model's " +
                                  std::to_string(spec.identity_classes) + " classes");
            term = losses::softmax_cross_entropy(g, head, std::vector<std::size_t>(R, static_cast<std::size_t>(id)), m);
            break;
        }
        }
        const double v = g.value(term)[0];
        if (!std::isfinite(v))
            throw NonFiniteLoss("non-finite " + std::string(task_name(t)) + " loss on a sample of domain '" +
                                sample.domain + "'");
        out.losses[t] = v;
        terms.push_back(term);
        term_weights.push_back(weights[t]);
        term_tasks.push_back(t);
    }
    const NodeId total = losses::weighted_sum(g, terms, term_weights);
    out.total = g.value(total)[0];
    out.gradients = g.backward(total).parameters;
    return out;
}

BatchLoss batch_loss(const Model& model, std::span<const SamplePool> pools, std::span<const BatchItem> batch,
                     std::span<const SampleRegions> regions, const TrainConfig& cfg, const TaskWeights& weights,
                     std::uint64_t iteration)
{
    if (regions.size() != batch.size()) throw ContractError("batch_loss: one region plan per batch item required");
    std::vector<SampleLoss> results(batch.size());
    std::vector<std::exception_ptr> errors(batch.size());
    auto work = [&](std::size_t i) {
        try {
            const Sample& s = pools[batch[i].pool].samples.at(batch[i].index);
            results[i] = sample_loss(model, s, regions[i], cfg, weights, iteration);
        } catch (const NonFiniteLoss& e) {
            errors[i] = std::make_exception_ptr(NonFiniteLoss(std::string(e.what()) + " (batch item " + std::to_string(i) +
                                                              ", pool '" + pools[batch[i].pool].name + "', sample " +
                                                              std::to_string(batch[i].index) + ")"));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.threads)), batch.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < batch.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < batch.size(); i += threads) work(i);
            });
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    // Fixed reduction order: batch order, then parameter path order.
    BatchLoss out;
    for (Task t : kAllTasks) out.losses[t] = 0.0;
    out.gradients = model.params().complete({});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        for (const auto& [t, v] : results[i].losses) out.losses[t] += v;
        out.total += results[i].total;
        for (const auto& [path, g] : results[i].gradients) {
            auto acc = out.gradients.at(path).mutable_data();
            const auto src = g.data();
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += src[k];
        }
        out.positives += regions[i].positives;
        out.negatives += regions[i].negatives;
    }
    return out;
}

BatchLoss dataset_loss(const Model& model, std::span<const SamplePool> pools, const TrainConfig& cfg, std::uint64_t iteration)
{
    std::vector<BatchItem> all;
    for (std::size_t p = 0; p < pools.size(); ++p)
        for (std::size_t i = 0; i < pools[p].samples.size(); ++i) all.push_back({p, i});
    const auto regions = plan_regions(pools, all, cfg, iteration);
    return batch_loss(model, pools, all, regions, cfg, cfg.weights, iteration);
}

namespace {

void clip_gradients(GradientMap& grads, double max_norm)
{
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& [_, g] : grads)
        for (double v : g.data()) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > max_norm)) return;
    const double scale = max_norm / norm;
    for (auto& [_, g] : grads)
        for (auto& v : g.mutable_data()) v *= scale;
}

}  // namespace

BatchLoss train_step(Model& model, Sgd& optimizer, std::span<const SamplePool> pools, const TrainConfig& cfg,
                     std::uint64_t iteration)
{
    const auto batch = sample_minibatch(pools, cfg, iteration);
    if (batch.empty()) throw ConfigError("every domain quota is zero; the batch is empty");
    const auto regions = plan_regions(pools, batch, cfg, iteration);
    auto result = batch_loss(model, pools, batch, regions, cfg, cfg.weights, iteration);
    clip_gradients(result.gradients, cfg.clip_norm);
    optimizer.set_learning_rate(cfg.learning_rate_at(iteration));
    optimizer.step(model.params(), result.gradients);
    return result;
}

Trainer::Trainer(Model& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)), sgd_(cfg_.learning_rate, cfg_.momentum)
{
    cfg_.validate();
}

BatchLoss Trainer::step(std::span<const SamplePool> pools)
{
    auto result = train_step(model_, sgd_, pools, cfg_, iteration_);
    if (iteration_ % cfg_.log_every == 0) {
        for (const auto& [t, v] : result.losses) history_.push_back({iteration_, std::string(task_name(t)), v});
        history_.push_back({iteration_, "total", result.total});
    }
    ++iteration_;
    return result;
}

void Trainer::run(std::span<const SamplePool> pools, const std::filesystem::path& out_dir,
                  const std::function<void(std::uint64_t, const BatchLoss&)>& on_step)
{
    std::ofstream csv;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const auto file = out_dir / "loss.csv";
        const bool fresh = iteration_ == 0 || !std::filesystem::exists(file);
        csv.open(file, fresh ? std::ios::trunc : std::ios::app);
        if (!csv) throw ConfigError("cannot write " + file.string());
        csv << std::setprecision(17);
        if (fresh) csv << "iteration,task,loss\n";
    }
    while (iteration_ < cfg_.steps) {
        const std::size_t before = history_.size();
        const std::uint64_t it = iteration_;
        const auto result = step(pools);
        if (csv.is_open())
            for (std::size_t k = before; k < history_.size(); ++k)
                csv << history_[k].iteration << ',' << history_[k].task << ',' << history_[k].loss << '\n';
        if (on_step) on_step(it, result);
        if (!out_dir.empty() && cfg_.checkpoint_every > 0 && iteration_ % cfg_.checkpoint_every == 0 && iteration_ < cfg_.steps) {
            std::ostringstream name;
            name << "step_" << std::setw(6) << std::setfill('0') << iteration_ << ".ckpt";
            checkpoint(out_dir / name.str());
        }
    }
    if (!out_dir.empty()) checkpoint(out_dir / "final.ckpt");
}

std::map<std::string, Tensor> Trainer::state() const
{
    std::map<std::string, Tensor> st = model_.params().values();
    for (const auto& [path, p] : model_.params().values()) {
        Tensor v = Tensor::zeros(p.shape());
        const auto it = sgd_.velocity().find(path);
        if (it != sgd_.velocity().end()) std::copy(it->second.begin(), it->second.end(), v.mutable_data().begin());
        st["optimizer/velocity/" + path] = std::move(v);
    }
    if (iteration_ >= (1u << 24)) throw CheckpointError("iteration count too large for the checkpoint format");
    Tensor it(Shape{1});
    it[0] = static_cast<double>(iteration_);
    st["meta/iteration"] = it;
    return st;
}

void Trainer::restore(const std::map<std::string, Tensor>& state)
{
    model_.load_parameters(state);
    const std::string prefix = "optimizer/velocity/";
    for (const auto& [path, p] : model_.params().values()) {
        const auto it = state.find(prefix + path);
        if (it == state.end()) continue;
        if (it->second.size() != p.size()) throw CheckpointError("velocity for '" + path + "' has the wrong size");
        sgd_.set_velocity(path, std::vector<double>(it->second.data().begin(), it->second.data().end()));
    }
    const auto it = state.find("meta/iteration");
    iteration_ = it == state.end() ? 0 : static_cast<std::uint64_t>(it->second[0]);
}

void Trainer::checkpoint(const std::filesystem::path& file)
{
    save_checkpoint(file, state());
    restore(load_checkpoint(file));
}

void Trainer::resume(const std::filesystem::path& file) { restore(load_checkpoint(file)); }

void write_loss_csv(const std::filesystem::path& file, std::span<const LossRecord> history)
{
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot write " + file.string());
    out << std::setprecision(17) << "iteration,task,loss\n";
    for (const auto& r : history) out << r.iteration << ',' << r.task << ',' << r.loss << '\n';
}

}  // namespace a1o
