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

#include "osd/loss.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "osd/error.h"
#include "osd/kv_config.h"

namespace osd::train {

using annotations::kNumClasses;

void ClassWeights::Validate() const {
  for (double x : w)
    if (!(x > 0.0) || !std::isfinite(x))
      throw ConfigError("class weights must be finite and positive, got " + ToString());
}

std::string ClassWeights::ToString() const {
  return FormatDouble(w[0]) + "," + FormatDouble(w[1]) + "," + FormatDouble(w[2]);
}

ClassWeights ClassWeights::Parse(std::string_view text) {
  ClassWeights out;
  size_t pos = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    size_t comma = text.find(',', pos);
    if ((c < kNumClasses - 1) == (comma == std::string_view::npos))
      throw ConfigError("class weights need exactly 3 comma-separated values");
    std::string_view field = text.substr(pos, comma - pos);
    out.w[size_t(c)] = ParseDouble(field, "train.weights");
    pos = comma + 1;
  }
  out.Validate();
  return out;
}

WeightsMode ParseWeightsMode(std::string_view text) {
  if (text == "uniform") return WeightsMode::kUniform;
  if (text == "inverse_frequency") return WeightsMode::kInverseFrequency;
  if (text == "explicit") return WeightsMode::kExplicit;
  throw ConfigError("unknown weights mode '" + std::string(text) +
                    "' (uniform, inverse_frequency, explicit)");
}

std::string WeightsModeName(WeightsMode mode) {
  switch (mode) {
    case WeightsMode::kUniform:
      return "uniform";
    case WeightsMode::kInverseFrequency:
      return "inverse_frequency";
    case WeightsMode::kExplicit:
      return "explicit";
  }
  return "?";
}

ClassWeights DeriveWeights(const annotations::DatasetStats& stats,
                           WeightsMode mode,
                           const ClassWeights& explicit_weights,
                           std::optional<double> zero_class_weight) {
  switch (mode) {
    case WeightsMode::kUniform:
      return ClassWeights{};
    case WeightsMode::kExplicit:
      explicit_weights.Validate();
      return explicit_weights;
    case WeightsMode::kInverseFrequency:
      break;
  }
  if (stats.total_frames() <= 0) throw DataError("derive weights: no frames");
  const auto p = stats.proportions();
  ClassWeights out;
  double min_w = std::numeric_limits<double>::infinity();
  for (int c = 0; c < kNumClasses; ++c) {
    if (p[size_t(c)] > 0.0) {
      out.w[size_t(c)] = 1.0 / p[size_t(c)];
      min_w = std::min(min_w, out.w[size_t(c)]);
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (p[size_t(c)] > 0.0) {
      out.w[size_t(c)] /= min_w;
    } else if (zero_class_weight) {
      out.w[size_t(c)] = *zero_class_weight;
    } else {
      throw DataError("derive weights: class " + std::to_string(c) +
                      " has no frames; set train.zero_class_weight");
    }
  }
  out.Validate();
  return out;
}

namespace {

double Accumulate(std::span<const LossInput> batch, const ClassWeights& weights,
                  std::vector<Eigen::MatrixXd>* grads) {
  double weighted_nll = 0.0;
  double weight_sum = 0.0;
  if (grads) grads->assign(batch.size(), Eigen::MatrixXd());
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto& in = batch[b];
    const Eigen::MatrixXd& x = *in.logits;
    const auto frames = x.cols();
    if (x.rows() != kNumClasses)
      throw DataError("loss: logits must have 3 rows");
    if (static_cast<Eigen::Index>(in.targets.size()) != frames ||
        static_cast<Eigen::Index>(in.mask.size()) != frames)
      throw DataError("loss: targets/mask length differs from logits");
    if (grads) (*grads)[b] = Eigen::MatrixXd::Zero(x.rows(), frames);
    for (Eigen::Index t = 0; t < frames; ++t) {
      if (!in.mask[size_t(t)]) continue;
      const auto col = x.col(t);
      if (!col.allFinite()) throw DivergenceError("loss: non-finite logits");
      const int y = in.targets[size_t(t)];
      if (y >= kNumClasses) throw DataError("loss: target out of range");
      const double m = col.maxCoeff();
      const double lse = m + std::log((col.array() - m).exp().sum());
      const double w = weights.w[size_t(y)];
      weighted_nll += w * (lse - col(y));
      weight_sum += w;
      if (grads) {
        auto g = (*grads)[b].col(t);
        g = (col.array() - lse).exp().matrix();
        g(y) -= 1.0;
        g *= w;
      }
    }
  }
  if (weight_sum <= 0.0) throw DataError("loss: empty mask");
  if (grads)
    for (auto& g : *grads) g /= weight_sum;
  return weighted_nll / weight_sum;
}

}  // namespace

double WeightedCrossEntropy(std::span<const LossInput> batch,
                            const ClassWeights& weights) {
  return Accumulate(batch, weights, nullptr);
}

double WeightedCrossEntropyWithGrad(std::span<const LossInput> batch,
                                    const ClassWeights& weights,
                                    std::vector<Eigen::MatrixXd>& grads) {
  return Accumulate(batch, weights, &grads);
}

std::vector<uint8_t> ValidMask(const annotations::FrameLabels& labels) {
  std::vector<uint8_t> mask(labels.labels.size(), 0);
  std::fill_n(mask.begin(), std::min<size_t>(mask.size(), size_t(labels.valid_frames)), 1);
  return mask;
}

}  // namespace osd::train
