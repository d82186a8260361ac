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

#ifndef OSD_LOSS_H_
#define OSD_LOSS_H_

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "osd/annotations.h"

namespace osd::train {

// Per-class loss weights (silence, single, overlap), stored unnormalised.
struct ClassWeights {
  std::array<double, annotations::kNumClasses> w{1.0, 1.0, 1.0};

  void Validate() const;  // all strictly positive and finite
  std::string ToString() const;  // "w0,w1,w2"
  static ClassWeights Parse(std::string_view text);
};

enum class WeightsMode { kUniform, kInverseFrequency, kExplicit };
WeightsMode ParseWeightsMode(std::string_view text);
std::string WeightsModeName(WeightsMode mode);

// uniform -> (1, 1, 1); explicit -> `explicit_weights`; inverse_frequency ->
// w_c proportional to 1 / p_c, scaled so the smallest weight is 1. A class
// with no frames takes `zero_class_weight` if given, otherwise DataError.
ClassWeights DeriveWeights(const annotations::DatasetStats& stats,
                           WeightsMode mode,
                           const ClassWeights& explicit_weights = {},
                           std::optional<double> zero_class_weight = {});

// One scored sequence: logits are classes x frames; mask[t] != 0 marks frames
// that count.
struct LossInput {
  const Eigen::MatrixXd* logits = nullptr;
  std::span<const uint8_t> targets;
  std::span<const uint8_t> mask;
};

// Weighted-mean cross-entropy over every masked frame of the batch:
//   sum_n w[y_n] * -log softmax(x_n)[y_n]  /  sum_n w[y_n]
// Log-softmax subtracts the row maximum first. Throws DivergenceError on
// non-finite logits and DataError when no frame is selected.
double WeightedCrossEntropy(std::span<const LossInput> batch,
                            const ClassWeights& weights);

// Same loss; also writes d(loss)/d(logits) for each sequence (classes x
// frames, zero on masked-out frames).
double WeightedCrossEntropyWithGrad(std::span<const LossInput> batch,
                                    const ClassWeights& weights,
                                    std::vector<Eigen::MatrixXd>& grads);

// Mask with ones on the first valid_frames entries.
std::vector<uint8_t> ValidMask(const annotations::FrameLabels& labels);

}  // namespace osd::train

#endif  // OSD_LOSS_H_
