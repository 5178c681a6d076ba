// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/losses.hpp"
#include "a1o/model.hpp"
#include "a1o/optimizer.hpp"
#include "a1o/sample.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace a1o {

struct IouThresholds {
    double positive = 0.5;    // detection positives: IOU > positive
    double negative = 0.35;   // detection negatives: IOU < negative
    double regression = 0.35; // landmarks/pose/visibility/smile: IOU > regression
};

struct TrainConfig {
    std::uint64_t steps = 1000;
    int batch_per_domain = 2;
    std::map<std::string, int> quotas;  // per-domain override of batch_per_domain
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::uint64_t lr_step = 0;  // multiply the rate by lr_gamma every lr_step iterations; 0 keeps it constant
    double lr_gamma = 0.1;
    double clip_norm = 0.0;  // global gradient-norm cap per step; 0 disables
    TaskWeights weights = TaskWeights::defaults();
    AgeLossParams age;
    IouThresholds iou;
    std::uint64_t seed = 1;
    int threads = 1;

    // Region sampling on detection images.
    int positives_per_face = 1;
    double negatives_per_positive = 3.0;
    int dead_zone_per_face = 1;
    std::vector<double> proposal_scales{24, 28, 32, 36, 40, 44};
    double proposal_stride = 0.25;

    std::uint64_t checkpoint_every = 0;  // 0: only the final checkpoint
    std::uint64_t log_every = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    int quota(const std::string& domain) const;
    double learning_rate_at(std::uint64_t iteration) const;

    /// Keys not listed are left at their defaults; unknown keys are rejected.
    static TrainConfig from_json(const nlohmann::json& j);
    static TrainConfig load(const std::filesystem::path& file);
    nlohmann::json to_json() const;
};

struct RegionSelection {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    std::vector<std::size_t> regression;  // includes the positives
};

/// Classifies proposals by IOU with `gt`. Throws ContractError on a
/// zero-area ground truth.
RegionSelection select_regions(std::span<const Box> proposals, const Box& gt, const IouThresholds& iou);

struct BatchItem {
    std::size_t pool = 0;
    std::size_t index = 0;
    friend bool operator==(const BatchItem&, const BatchItem&) = default;
};

/// Round-robin over pools with per-domain quotas, drawing without replacement
/// inside a batch when the pool is large enough. Deterministic in
/// (cfg.seed, iteration). Throws ConfigError on an empty pool.
std::vector<BatchItem> sample_minibatch(std::span<const SamplePool> pools, const TrainConfig& cfg, std::uint64_t iteration);

/// One training row: an input crop plus its targets and masks.
struct Region {
    Box box;
    int detection = -1;  // 1 face, 0 background, -1 not a detection example
    bool regression = false;
    bool aligned = false;  // carries the gender/age/identity labels
};

/// Rows drawn from one sample at one iteration.
struct SampleRegions {
    std::vector<Region> rows;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// Regions for every batch item. Detection images get `positives_per_face`
/// positives (the ground-truth box is always a candidate), dead-zone
/// regression rows, and negatives at `negatives_per_positive` times the
/// batch's positive count; other samples use the whole image as one row.
std::vector<SampleRegions> plan_regions(std::span<const SamplePool> pools, std::span<const BatchItem> batch,
                                        const TrainConfig& cfg, std::uint64_t iteration);

class NonFiniteLoss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SampleLoss {
    std::map<Task, double> losses;  // unweighted, summed over rows
    double total = 0.0;
    GradientMap gradients;
};

/// Loss and gradient of one sample under `weights`. Only labeled tasks are
/// recorded in the graph. Throws NonFiniteLoss naming the task and sample.
SampleLoss sample_loss(const Model& model, const Sample& sample, const SampleRegions& regions, const TrainConfig& cfg,
                       const TaskWeights& weights, std::uint64_t iteration);

struct BatchLoss {
    std::map<Task, double> losses;  // every task, zero where unlabeled
    double total = 0.0;
    GradientMap gradients;  // complete over the model's parameters
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// Sum over the batch in batch order; per-sample work runs on cfg.threads
/// threads.
BatchLoss batch_loss(const Model& model, std::span<const SamplePool> pools, std::span<const BatchItem> batch,
                     std::span<const SampleRegions> regions, const TrainConfig& cfg, const TaskWeights& weights,
                     std::uint64_t iteration);

/// Loss of every sample in every pool with regions drawn for `iteration`,
/// without updating anything.
BatchLoss dataset_loss(const Model& model, std::span<const SamplePool> pools, const TrainConfig& cfg,
                       std::uint64_t iteration);

/// Samples, plans and applies one SGD update.
BatchLoss train_step(Model& model, Sgd& optimizer, std::span<const SamplePool> pools, const TrainConfig& cfg,
                     std::uint64_t iteration);

struct LossRecord {
    std::uint64_t iteration;
    std::string task;  // task name or "total"
    double loss;
};

/// Owns the optimizer state and iteration counter of a training run.
class Trainer {
public:
    Trainer(Model& model, TrainConfig cfg);

    std::uint64_t iteration() const { return iteration_; }
    const TrainConfig& config() const { return cfg_; }
    const Sgd& optimizer() const { return sgd_; }
    const std::vector<LossRecord>& history() const { return history_; }

    BatchLoss step(std::span<const SamplePool> pools);
    /// Steps until cfg.steps iterations have run. With an output directory,
    /// writes checkpoints and `loss.csv` there.
    void run(std::span<const SamplePool> pools, const std::filesystem::path& out_dir = {},
             const std::function<void(std::uint64_t, const BatchLoss&)>& on_step = {});

    /// Parameters, momentum buffers (under "optimizer/") and the iteration
    /// (under "meta/").
    std::map<std::string, Tensor> state() const;
    void restore(const std::map<std::string, Tensor>& state);
    /// Writes the state and continues from the stored (single-precision)
    /// values so a resumed run follows the same trajectory.
    void checkpoint(const std::filesystem::path& file);
    void resume(const std::filesystem::path& file);

private:
    Model& model_;
    TrainConfig cfg_;
    Sgd sgd_;
    std::uint64_t iteration_ = 0;
    std::vector<LossRecord> history_;
};

void write_loss_csv(const std::filesystem::path& file, std::span<const LossRecord> history);

}  // namespace a1o
