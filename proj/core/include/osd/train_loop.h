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

#ifndef OSD_TRAIN_LOOP_H_
#define OSD_TRAIN_LOOP_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "osd/annotations.h"
#include "osd/audio_features.h"
#include "osd/kv_config.h"
#include "osd/loss.h"
#include "osd/model_zoo.h"

namespace osd::train {

struct TrainConfig {
  double initial_lr = 1e-3;
  double lr_decay = 0.1;
  int early_stop_patience = 6;
  int max_epochs = 100;
  int batch_size = 32;
  WeightsMode weights_mode = WeightsMode::kInverseFrequency;
  ClassWeights explicit_weights;
  std::optional<double> zero_class_weight;
  uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool shuffle = true;

  void Validate() const;  // throws ConfigError
  KeyValueConfig ToKeyValues() const;  // keys prefixed "train."
  static TrainConfig FromKeyValues(const KeyValueConfig& kv);
};

enum class StopReason { kEarlyStop, kMaxEpochs };
std::string StopReasonName(StopReason reason);  // "early_stop" / "max_epochs"

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
  bool improved = false;
};

struct TrainState {
  int epoch = 0;
  double best_validation_loss = 0.0;
  int epochs_since_improvement = 0;
  double current_lr = 0.0;
  int decay_events = 0;
  std::string rng_digest;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  StopReason stop_reason = StopReason::kMaxEpochs;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  ClassWeights weights;
};

// Epoch driver: run an epoch at the current LR, validate, and on a
// non-improving validation loss bump the patience counter and decay the LR
// (lr = initial * decay^k). Stops once the counter reaches the patience or
// after max_epochs. Non-finite losses raise DivergenceError.
struct ScheduleHooks {
  std::function<double(int epoch, double lr)> train_epoch;
  std::function<double()> validate;
  std::function<void(int epoch)> on_improved;  // optional
  std::function<void(const TrainState&)> on_epoch_end;  // optional
  std::function<std::string()> rng_digest;              // optional
};
TrainResult RunSchedule(const TrainConfig& config, const ScheduleHooks& hooks);

// A training or validation example: cached features plus frame labels.
struct Example {
  audio::FeatureMatrix features;
  annotations::FrameLabels labels;
};

// Returns the features to train on for one example at one step; the default
// uses the cached features. Augmentation plugs in here.
using FeatureSource =
    std::function<const audio::FeatureMatrix&(size_t index, std::mt19937_64& rng,
                                              audio::FeatureMatrix& scratch)>;

class AdamOptimizer {
 public:
  AdamOptimizer(nn::ParameterStore& params, double beta1, double beta2,
                double eps);
  void Step(double lr);
  int64_t steps() const { return steps_; }

 private:
  nn::ParameterStore& params_;
  double beta1_, beta2_, eps_;
  int64_t steps_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

class Trainer {
 public:
  Trainer(models::OsdModel& model, const TrainConfig& config,
          const ClassWeights& weights);

  // One pass over `train` in seeded shuffled order; returns the epoch's
  // weighted-mean training loss.
  double TrainEpoch(std::span<const Example> train, double lr,
                    const FeatureSource& source = {});
  // Weighted-mean loss in evaluation mode.
  double Evaluate(std::span<const Example> examples) const;
  // Frame accuracy over valid frames, evaluation mode.
  double FrameAccuracy(std::span<const Example> examples) const;

  // Full recipe; restores the best-validation parameters before returning.
  TrainResult Fit(std::span<const Example> train,
                  std::span<const Example> validation,
                  const FeatureSource& source = {});

  std::mt19937_64& rng() { return rng_; }

 private:
  models::OsdModel& model_;
  TrainConfig config_;
  ClassWeights weights_;
  AdamOptimizer optimizer_;
  std::mt19937_64 rng_;
};

// Line-oriented log: a commented header, then one tab-separated record per
// epoch (epoch, train_loss, val_loss, lr, seconds) and trailing
// "# stop_reason=" / "# best_epoch=" lines.
std::string FormatTrainingLog(const TrainResult& result,
                              const KeyValueConfig& extra = {});

}  // namespace osd::train

#endif  // OSD_TRAIN_LOOP_H_
