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

#include "osd/metrics_eval.h"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "osd/error.h"

namespace osd::metrics {
namespace {

double Ratio(int64_t num, int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  for (int c = 0; c < kNumClasses; ++c) {
    tp[c] += other.tp[c];
    fp[c] += other.fp[c];
    fn[c] += other.fn[c];
    reference[c] += other.reference[c];
  }
  frames += other.frames;
  return *this;
}

ConfusionCounts CountConfusion(std::span<const uint8_t> pred,
                               std::span<const uint8_t> ref,
                               std::span<const uint8_t> mask) {
  if (pred.size() != ref.size())
    throw DataError("frame_f1: prediction has " + std::to_string(pred.size()) +
                    " frames, reference has " + std::to_string(ref.size()));
  if (!mask.empty() && mask.size() != ref.size())
    throw DataError("frame_f1: mask length does not match the reference");
  ConfusionCounts counts;
  for (size_t t = 0; t < ref.size(); ++t) {
    if (!mask.empty() && !mask[t]) continue;
    const int p = pred[t], r = ref[t];
    if (p >= kNumClasses || r >= kNumClasses)
      throw DataError("frame_f1: label out of range at frame " + std::to_string(t));
    ++counts.frames;
    ++counts.reference[r];
    if (p == r) {
      ++counts.tp[p];
    } else {
      ++counts.fp[p];
      ++counts.fn[r];
    }
  }
  return counts;
}

PrfScore ScoreClass(const ConfusionCounts& counts, int target) {
  const int64_t tp = counts.tp[target], fp = counts.fp[target], fn = counts.fn[target];
  PrfScore s;
  s.precision = Ratio(tp, tp + fp);
  s.recall = Ratio(tp, tp + fn);
  s.f1 = Ratio(2 * tp, 2 * tp + fp + fn);
  return s;
}

PrfScore FrameF1(std::span<const uint8_t> pred, std::span<const uint8_t> ref,
                 std::span<const uint8_t> mask, int target) {
  return ScoreClass(CountConfusion(pred, ref, mask), target);
}

std::vector<uint8_t> ArgmaxLabels(const Eigen::MatrixXd& logits) {
  std::vector<uint8_t> out(static_cast<size_t>(logits.cols()), 0);
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.rows(); ++c)
      if (logits(c, t) > logits(best, t)) best = c;
    out[static_cast<size_t>(t)] = static_cast<uint8_t>(best);
  }
  return out;
}

std::vector<uint8_t> MedianFilter(std::span<const uint8_t> labels, int width) {
  std::vector<uint8_t> out(labels.begin(), labels.end());
  if (width <= 1) return out;
  if (width % 2 == 0) throw ConfigError("median filter width must be odd");
  const auto n = static_cast<int64_t>(labels.size());
  const int half = width / 2;
  std::vector<uint8_t> window;
  for (int64_t t = 0; t < n; ++t) {
    const int64_t lo = std::max<int64_t>(0, t - half);
    const int64_t hi = std::min<int64_t>(n, t + half + 1);
    window.assign(labels.begin() + lo, labels.begin() + hi);
    auto mid = window.begin() + static_cast<int64_t>(window.size() / 2);
    std::nth_element(window.begin(), mid, window.end());
    out[static_cast<size_t>(t)] = *mid;
  }
  return out;
}

void ApplyCollar(std::span<const uint8_t> ref, int collar,
                 std::vector<uint8_t>& mask, int target) {
  if (collar <= 0) return;
  if (mask.size() != ref.size()) throw DataError("collar: mask length mismatch");
  const auto n = static_cast<int64_t>(ref.size());
  for (int64_t t = 1; t < n; ++t) {
    const bool was = ref[size_t(t - 1)] == target;
    const bool is = ref[size_t(t)] == target;
    if (was == is) continue;
    // Boundary between frames t-1 and t.
    const int64_t lo = std::max<int64_t>(0, t - collar);
    const int64_t hi = std::min<int64_t>(n, t + collar);
    std::fill(mask.begin() + lo, mask.begin() + hi, 0);
  }
}

double MeanF1(std::span<const DatasetScore> datasets) {
  if (datasets.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& d : datasets) sum += d.overlap.f1;
  return sum / static_cast<double>(datasets.size());
}

EvalReport ScoreDecisions(std::span<const EvalItem> items,
                          std::span<const std::vector<uint8_t>> decisions,
                          const EvalOptions& options) {
  if (decisions.size() != items.size())
    throw DataError("evaluate: decision count does not match item count");
  std::map<std::string, DatasetScore> by_tag;
  for (size_t i = 0; i < items.size(); ++i) {
    const auto& labels = items[i].labels;
    const auto& pred = decisions[i];
    if (pred.size() != labels.labels.size())
      throw DataError("evaluate: segment " + labels.segment_id + " has " +
                      std::to_string(pred.size()) + " predicted frames, expected " +
                      std::to_string(labels.labels.size()));
    std::vector<uint8_t> mask(labels.labels.size(), 0);
    std::fill_n(mask.begin(), std::min<size_t>(mask.size(), size_t(labels.valid_frames)), 1);
    ApplyCollar(labels.labels, options.collar_frames, mask);
    const std::vector<uint8_t> smoothed = MedianFilter(pred, options.median_width);
    auto& score = by_tag[items[i].tag];
    score.tag = items[i].tag;
    ++score.segments;
    score.counts += CountConfusion(smoothed, labels.labels, mask);
  }
  for (const auto& tag : options.required_tags)
    if (!by_tag.count(tag))
      throw DataError("evaluate: required dataset '" + tag + "' has no segments");

  EvalReport report;
  report.system_name = options.system_name;
  for (auto& [tag, score] : by_tag) {
    for (int c = 0; c < kNumClasses; ++c) score.per_class[c] = ScoreClass(score.counts, c);
    score.overlap = score.per_class[annotations::kOverlap];
    report.datasets.push_back(score);
  }
  report.mean_f1 = MeanF1(report.datasets);
  report.digests.Set("eval.collar_frames", std::to_string(options.collar_frames));
  report.digests.Set("eval.median_width", std::to_string(options.median_width));
  return report;
}

EvalReport Evaluate(std::span<const EvalItem> items, const Predictor& predict,
                    const EvalOptions& options) {
  std::vector<std::vector<uint8_t>> decisions;
  decisions.reserve(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    const Eigen::MatrixXd logits = predict(i);
    if (logits.rows() != kNumClasses)
      throw DataError("evaluate: predictor returned " + std::to_string(logits.rows()) +
                      " classes");
    decisions.push_back(ArgmaxLabels(logits));
  }
  return ScoreDecisions(items, decisions, options);
}

std::string EvalReport::FormatTable() const {
  std::ostringstream os;
  size_t name_width = std::max<size_t>(system_name.size(), 6);
  std::vector<size_t> widths;
  os << std::string(name_width - 6, ' ') << "System";
  for (const auto& d : datasets) {
    widths.push_back(std::max<size_t>(d.tag.size(), 6));
    os << " | " << std::string(widths.back() - d.tag.size(), ' ') << d.tag;
  }
  os << " |   Mean\n";
  os << std::string(name_width - system_name.size(), ' ') << system_name;
  for (size_t i = 0; i < datasets.size(); ++i) {
    const std::string v = Fixed(100.0 * datasets[i].overlap.f1, 2);
    os << " | " << std::string(widths[i] > v.size() ? widths[i] - v.size() : 0, ' ') << v;
  }
  const std::string mean = Fixed(100.0 * mean_f1, 2);
  os << " | " << std::string(mean.size() < 6 ? 6 - mean.size() : 0, ' ') << mean << "\n";
  os << "\nOverlap F1 (%) per dataset; Mean is the unweighted average.\n\n";
  os << "dataset\tclass\tprecision\trecall\tf1\treference_frames\n";
  static const char* kNames[kNumClasses] = {"silence", "single", "overlap"};
  for (const auto& d : datasets) {
    for (int c = 0; c < kNumClasses; ++c) {
      os << d.tag << '\t' << kNames[c] << '\t' << Fixed(d.per_class[c].precision, 4)
         << '\t' << Fixed(d.per_class[c].recall, 4) << '\t' << Fixed(d.per_class[c].f1, 4)
         << '\t' << d.counts.reference[c] << '\n';
    }
  }
  return os.str();
}

std::string EvalReport::FormatRecords() const {
  std::ostringstream os;
  for (const auto& d : datasets) {
    const int o = annotations::kOverlap;
    os << "dataset=" << d.tag << "\tsegments=" << d.segments << "\tframes=" << d.counts.frames
       << "\ttp=" << d.counts.tp[o] << "\tfp=" << d.counts.fp[o] << "\tfn=" << d.counts.fn[o]
       << "\tprecision=" << FormatDouble(d.overlap.precision)
       << "\trecall=" << FormatDouble(d.overlap.recall)
       << "\tf1=" << FormatDouble(d.overlap.f1) << '\n';
  }
  os << "summary\tsystem=" << system_name << "\tdatasets=" << datasets.size()
     << "\tmean_f1=" << FormatDouble(mean_f1);
  for (const auto& [k, v] : digests.entries()) os << '\t' << k << '=' << v;
  os << '\n';
  return os.str();
}

}  // namespace osd::metrics
