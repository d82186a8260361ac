// Copyright 2026 The osdkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef OSD_METRICS_EVAL_H_
#define OSD_METRICS_EVAL_H_

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "osd/annotations.h"
#include "osd/kv_config.h"

namespace osd::metrics {

using annotations::kNumClasses;

// One-vs-rest counts for every class over the scored frames.
struct ConfusionCounts {
  std::array<int64_t, kNumClasses> tp{};
  std::array<int64_t, kNumClasses> fp{};
  std::array<int64_t, kNumClasses> fn{};
  std::array<int64_t, kNumClasses> reference{};
  int64_t frames = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& other);
};

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// An empty mask scores every frame. Throws DataError on length mismatch or a
// label outside the class coding.
ConfusionCounts CountConfusion(std::span<const uint8_t> pred,
                               std::span<const uint8_t> ref,
                               std::span<const uint8_t> mask = {});

// 0/0 is taken as 0 for precision, recall and F1.
PrfScore ScoreClass(const ConfusionCounts& counts,
                    int target = annotations::kOverlap);

PrfScore FrameF1(std::span<const uint8_t> pred, std::span<const uint8_t> ref,
                 std::span<const uint8_t> mask = {},
                 int target = annotations::kOverlap);

// Per-frame argmax of a classes x frames matrix; ties go to the lower index.
std::vector<uint8_t> ArgmaxLabels(const Eigen::MatrixXd& logits);

// Sliding-window majority (median for ordinal labels) of odd width; width <= 1
// returns the input. Edges use the truncated window.
std::vector<uint8_t> MedianFilter(std::span<const uint8_t> labels, int width);

// Clears mask entries within `collar` frames of a reference change into or out
// of the target class.
void ApplyCollar(std::span<const uint8_t> ref, int collar,
                 std::vector<uint8_t>& mask,
                 int target = annotations::kOverlap);

struct EvalOptions {
  int median_width = 1;  // 1 disables post-processing
  int collar_frames = 0;
  // Tags that must be present; a missing one is a DataError. Empty means
  // score whatever is present.
  std::vector<std::string> required_tags;
  std::string system_name = "system";
};

struct DatasetScore {
  std::string tag;
  int64_t segments = 0;
  ConfusionCounts counts;
  PrfScore overlap;
  std::array<PrfScore, kNumClasses> per_class;
};

struct EvalReport {
  std::string system_name;
  std::vector<DatasetScore> datasets;  // sorted by tag
  double mean_f1 = 0.0;  // unweighted mean of the per-dataset overlap F1
  KeyValueConfig digests;

  // Paper-style table: one row for the system, one column per dataset, then
  // Mean; followed by per-class precision / recall.
  std::string FormatTable() const;
  // Tab-separated key=value records, one per dataset, then a summary record.
  std::string FormatRecords() const;
};

// A scored segment: reference labels (valid_frames bounds the mask) and the
// dataset it belongs to.
struct EvalItem {
  std::string tag;
  annotations::FrameLabels labels;
};

// Produces classes x frames logits for item `index`.
using Predictor = std::function<Eigen::MatrixXd(size_t index)>;

EvalReport Evaluate(std::span<const EvalItem> items, const Predictor& predict,
                    const EvalOptions& options = {});

// Same scoring from precomputed frame decisions.
EvalReport ScoreDecisions(std::span<const EvalItem> items,
                          std::span<const std::vector<uint8_t>> decisions,
                          const EvalOptions& options = {});

double MeanF1(std::span<const DatasetScore> datasets);

}  // namespace osd::metrics

#endif  // OSD_METRICS_EVAL_H_
