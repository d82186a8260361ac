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

#ifndef OSD_MODEL_ZOO_H_
#define OSD_MODEL_ZOO_H_

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "osd/audio_features.h"
#include "osd/autograd.h"
#include "osd/kv_config.h"
#include "osd/layers.h"

namespace osd::models {

// TF: Transformer, TCN: temporal convolutional network, CF: Conformer,
// ROSD: bidirectional LSTM.
enum class Family { kTF, kTCN, kCF, kROSD };

std::string FamilyName(Family family);
Family ParseFamily(std::string_view name);  // throws ConfigError

struct ModelConfig {
  Family family = Family::kCF;
  int input_dim = 64;
  int model_dim = 168;
  int block_count = 6;
  int head_count = 8;
  int ff_dim = 640;
  int tcn_resblocks_per_block = 8;
  int tcn_kernel = 3;
  int conv_kernel = 15;
  int hidden_dim = 256;
  double dropout = 0.1;
  int class_count = 3;
  uint64_t seed = 0;
  // When set, the family's reference topology (block and head counts) is
  // enforced. Toy configurations for tests turn it off.
  bool strict = true;

  // Defaults sized to the target parameter budgets.
  static ModelConfig Default(Family family);

  void Validate() const;  // throws ConfigError
  KeyValueConfig ToKeyValues() const;  // keys prefixed "model."
  // Starts from Default(model.family) and applies every model.* key.
  static ModelConfig FromKeyValues(const KeyValueConfig& kv);
  // Digest over the fields that determine parameter shapes.
  std::string ArchitectureDigest() const;
};

// Raw class scores, class_count x frames.
struct PredictionMatrix {
  Eigen::MatrixXd logits;
  int valid_frames = 0;
  std::string segment_id;

  int frame_count() const { return static_cast<int>(logits.cols()); }
};

// Pre-Net -> Encoder -> Post-Net. Pre-Net is a 1x1 convolution (TF, TCN, CF)
// or a linear map (ROSD) from the feature dimension to model_dim; Post-Net
// maps encoder output to class scores. A 1x1 convolution over frames and a
// per-frame linear layer are the same computation and parameter count.
class OsdModel {
 public:
  explicit OsdModel(const ModelConfig& config);
  ~OsdModel();
  OsdModel(const OsdModel&) = delete;
  OsdModel& operator=(const OsdModel&) = delete;

  // features: frames x input_dim. Returns frames x class_count logits.
  nn::Var Forward(const Eigen::MatrixXd& features,
                  const nn::ForwardContext& ctx) const;

  // Evaluation-mode forward of a mel_bins x frames feature matrix.
  PredictionMatrix Predict(const audio::FeatureMatrix& features) const;

  // Encoder output, channels x frames (model_dim x frames; 2 * hidden_dim for
  // ROSD), evaluation mode.
  Eigen::MatrixXd Embed(const audio::FeatureMatrix& features) const;

  int64_t ParamCount() const { return params_.Count(); }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }
  const ModelConfig& config() const { return config_; }

  struct Encoder;

 private:
  nn::Var EncodeFrames(const Eigen::MatrixXd& features,
                       const nn::ForwardContext& ctx) const;
  void CheckInput(const audio::FeatureMatrix& features) const;

  ModelConfig config_;
  nn::ParameterStore params_;
  nn::Linear pre_net_;
  std::unique_ptr<Encoder> encoder_;
  nn::Linear post_net_;
};

std::unique_ptr<OsdModel> BuildModel(const ModelConfig& config);

}  // namespace osd::models

#endif  // OSD_MODEL_ZOO_H_
