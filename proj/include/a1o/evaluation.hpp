// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/metrics.hpp"
#include "a1o/model.hpp"
#include "a1o/pipeline.hpp"
#include "a1o/sample.hpp"

#include <span>
#include <string>
#include <vector>

namespace a1o {

struct EvalOptions {
    PipelineConfig pipeline;
    // Proposal grid and IOU gates used by the "fit" protocol.
    std::vector<double> proposal_scales{24, 28, 32, 36, 40, 44};
    double proposal_stride = 0.25;
    double positive_iou = 0.5;
    double negative_iou = 0.35;
    std::vector<int> ranks{1, 5, 10};
    std::vector<double> fars{0.01, 0.1};
    int threads = 1;
};

/// Protocol names accepted by evaluate().
const std::vector<std::string>& protocol_names();

/// Runs one protocol over every sample carrying the labels it needs.
///
/// fit: accuracy on the inputs the trainer sees (gt boxes, whole patches,
/// grid proposals split by IOU). detection: full pipeline, AP at IOU 0.5.
/// landmarks / pose: region tasks on the gt box. gender / age / identity:
/// aligned tasks with flip averaging. smile: region tasks on the gt box.
/// Throws ConfigError on an unknown protocol and ContractError when no
/// sample carries the needed labels.
MetricReport evaluate(const Model& model, std::span<const SamplePool> pools, const std::string& protocol,
                      const EvalOptions& opt = {});

}  // namespace a1o
