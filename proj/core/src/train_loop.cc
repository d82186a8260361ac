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

#include "osd/train_loop.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "osd/digest.h"
#include "osd/error.h"

namespace osd::train {

void TrainConfig::Validate() const {
  if (!(initial_lr > 0.0)) throw ConfigError("train.initial_lr must be > 0");
  if (!(lr_decay > 0.0 && lr_decay < 1.0))
    throw ConfigError("train.lr_decay must be in (0, 1)");
  if (early_stop_patience < 1) throw ConfigError("train.patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (weights_mode == WeightsMode::kExplicit) explicit_weights.Validate();
  if (zero_class_weight && !(*zero_class_weight > 0.0))
    throw ConfigError("train.zero_class_weight must be > 0");
}

KeyValueConfig TrainConfig::ToKeyValues() const {
  KeyValueConfig kv;
  kv.Set("train.initial_lr", FormatDouble(initial_lr));
  kv.Set("train.lr_decay", FormatDouble(lr_decay));
  kv.Set("train.patience", std::to_string(early_stop_patience));
  kv.Set("train.max_epochs", std::to_string(max_epochs));
  kv.Set("train.batch_size", std::to_string(batch_size));
  kv.Set("train.weights_mode", WeightsModeName(weights_mode));
  kv.Set("train.weights", explicit_weights.ToString());
  if (zero_class_weight) kv.Set("train.zero_class_weight", FormatDouble(*zero_class_weight));
  kv.Set("train.seed", std::to_string(seed));
  kv.Set("train.adam_beta1", FormatDouble(adam_beta1));
  kv.Set("train.adam_beta2", FormatDouble(adam_beta2));
  kv.Set("train.adam_eps", FormatDouble(adam_eps));
  kv.Set("train.shuffle", shuffle ? "true" : "false");
  return kv;
}

TrainConfig TrainConfig::FromKeyValues(const KeyValueConfig& kv) {
  TrainConfig c;
  auto num = [&](const char* key, double& dst) {
    if (auto v = kv.Get(key)) dst = ParseDouble(*v, key);
  };
  auto integer = [&](const char* key, int& dst) {
    if (auto v = kv.Get(key)) dst = static_cast<int>(ParseInt(*v, key));
  };
  num("train.initial_lr", c.initial_lr);
  num("train.lr_decay", c.lr_decay);
  integer("train.patience", c.early_stop_patience);
  integer("train.max_epochs", c.max_epochs);
  integer("train.batch_size", c.batch_size);
  if (auto v = kv.Get("train.weights_mode")) c.weights_mode = ParseWeightsMode(*v);
  if (auto v = kv.Get("train.weights")) c.explicit_weights = ClassWeights::Parse(*v);
  if (auto v = kv.Get("train.zero_class_weight"))
    c.zero_class_weight = ParseDouble(*v, "train.zero_class_weight");
  if (auto v = kv.Get("train.seed")) c.seed = static_cast<uint64_t>(ParseInt(*v, "train.seed"));
  num("train.adam_beta1", c.adam_beta1);
  num("train.adam_beta2", c.adam_beta2);
  num("train.adam_eps", c.adam_eps);
  if (auto v = kv.Get("train.shuffle")) c.shuffle = ParseBool(*v, "train.shuffle");
  c.Validate();
  return c;
}

std::string StopReasonName(StopReason reason) {
  return reason == StopReason::kEarlyStop ? "early_stop" : "max_epochs";
}

TrainResult RunSchedule(const TrainConfig& config, const ScheduleHooks& hooks) {
  config.Validate();
  TrainResult result;
  TrainState state;
  state.current_lr = config.initial_lr;
  state.best_validation_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    state.epoch = epoch;
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = state.current_lr;
    rec.train_loss = hooks.train_epoch(epoch, state.current_lr);
    rec.val_loss = hooks.validate();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                            ": train_loss=" + FormatDouble(rec.train_loss) +
                            " val_loss=" + FormatDouble(rec.val_loss) +
                            " lr=" + FormatDouble(rec.lr));

    rec.improved = rec.val_loss < state.best_validation_loss;
    if (rec.improved) {
      state.best_validation_loss = rec.val_loss;
      state.epochs_since_improvement = 0;
      result.best_epoch = epoch;
      if (hooks.on_improved) hooks.on_improved(epoch);
    } else {
      ++state.epochs_since_improvement;
      ++state.decay_events;
      state.current_lr = config.initial_lr * std::pow(config.lr_decay, state.decay_events);
    }
    result.log.push_back(rec);
    if (hooks.rng_digest) state.rng_digest = hooks.rng_digest();
    if (hooks.on_epoch_end) hooks.on_epoch_end(state);
    if (state.epochs_since_improvement >= config.early_stop_patience) {
      result.stop_reason = StopReason::kEarlyStop;
      result.best_validation_loss = state.best_validation_loss;
      return result;
    }
  }
  result.stop_reason = StopReason::kMaxEpochs;
  result.best_validation_loss = state.best_validation_loss;
  return result;
}

AdamOptimizer::AdamOptimizer(nn::ParameterStore& params, double beta1,
                             double beta2, double eps)
    : params_(params), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_.all()) {
    m_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
  }
}

void AdamOptimizer::Step(double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, double(steps_));
  const double c2 = 1.0 - std::pow(beta2_, double(steps_));
  size_t i = 0;
  for (auto& p : params_.all()) {
    auto& m = m_[i];
    auto& v = v_[i];
    ++i;
    if (p.grad.size() != p.value.size()) continue;
    m = beta1_ * m + (1.0 - beta1_) * p.grad;
    v = beta2_ * v + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

Trainer::Trainer(models::OsdModel& model, const TrainConfig& config,
                 const ClassWeights& weights)
    : model_(model),
      config_(config),
      weights_(weights),
      optimizer_(model.params(), config.adam_beta1, config.adam_beta2, config.adam_eps),
      rng_(config.seed) {
  config_.Validate();
  weights_.Validate();
}

double Trainer::TrainEpoch(std::span<const Example> train, double lr,
                           const FeatureSource& source) {
  if (train.empty()) throw DataError("empty training set");
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});
  if (config_.shuffle) std::shuffle(order.begin(), order.end(), rng_);

  const std::span<const double> w(weights_.w);
  double epoch_loss = 0.0;
  double epoch_weight = 0.0;
  audio::FeatureMatrix scratch;
  for (size_t start = 0; start < order.size(); start += size_t(config_.batch_size)) {
    const size_t stop = std::min(order.size(), start + size_t(config_.batch_size));
    double batch_weight = 0.0;
    for (size_t j = start; j < stop; ++j) {
      const auto& l = train[order[j]].labels;
      for (int t = 0; t < l.valid_frames; ++t) batch_weight += w[l.labels[size_t(t)]];
    }
    if (batch_weight <= 0.0) continue;

    model_.params().ZeroGrad();
    for (size_t j = start; j < stop; ++j) {
      const Example& ex = train[order[j]];
      const audio::FeatureMatrix& feats =
          source ? source(order[j], rng_, scratch) : ex.features;
      nn::ForwardContext ctx;
      ctx.training = true;
      ctx.dropout = model_.config().dropout;
      ctx.rng = &rng_;
      ctx.valid_frames = ex.labels.valid_frames;
      nn::Var logits = model_.Forward(feats.values.transpose(), ctx);
      nn::Var nll = nn::WeightedNllSum(logits, ex.labels.labels, w, ex.labels.valid_frames);
      const double value = nll.value()(0, 0);
      if (!std::isfinite(value))
        throw DivergenceError("non-finite training loss on segment " + ex.labels.segment_id);
      nn::Backward(nll, 1.0 / batch_weight);
      epoch_loss += value;
    }
    epoch_weight += batch_weight;
    optimizer_.Step(lr);
  }
  if (epoch_weight <= 0.0) throw DataError("training set has no valid frames");
  return epoch_loss / epoch_weight;
}

double Trainer::Evaluate(std::span<const Example> examples) const {
  std::vector<Eigen::MatrixXd> logits;
  std::vector<std::vector<uint8_t>> masks;
  logits.reserve(examples.size());
  masks.reserve(examples.size());
  std::vector<LossInput> batch;
  for (const auto& ex : examples) {
    logits.push_back(model_.Predict(ex.features).logits);
    masks.push_back(ValidMask(ex.labels));
  }
  for (size_t i = 0; i < examples.size(); ++i)
    batch.push_back({&logits[i], examples[i].labels.labels, masks[i]});
  return WeightedCrossEntropy(batch, weights_);
}

double Trainer::FrameAccuracy(std::span<const Example> examples) const {
  int64_t correct = 0;
  int64_t total = 0;
  for (const auto& ex : examples) {
    const auto pred = model_.Predict(ex.features);
    for (int t = 0; t < ex.labels.valid_frames; ++t) {
      Eigen::Index arg = 0;
      pred.logits.col(t).maxCoeff(&arg);
      correct += arg == ex.labels.labels[size_t(t)];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

TrainResult Trainer::Fit(std::span<const Example> train,
                         std::span<const Example> validation,
                         const FeatureSource& source) {
  if (train.empty() || validation.empty())
    throw DataError("training needs non-empty train and validation sets");
  std::vector<Eigen::MatrixXd> best;
  auto snapshot = [&] {
    best.clear();
    for (const auto& p : model_.params().all()) best.push_back(p.value);
  };
  ScheduleHooks hooks;
  hooks.train_epoch = [&](int, double lr) { return TrainEpoch(train, lr, source); };
  hooks.validate = [&] { return Evaluate(validation); };
  hooks.on_improved = [&](int) { snapshot(); };
  hooks.rng_digest = [&] {
    std::ostringstream state;
    state << rng_;
    return ShortDigest(state.str());
  };
  TrainResult result = RunSchedule(config_, hooks);
  if (!best.empty()) {
    size_t i = 0;
    for (auto& p : model_.params().all()) p.value = best[i++];
  }
  result.weights = weights_;
  return result;
}

std::string FormatTrainingLog(const TrainResult& result,
                              const KeyValueConfig& extra) {
  std::ostringstream out;
  for (const auto& [k, v] : extra.entries()) out << "# " << k << '=' << v << '\n';
  out << "# weights=" << result.weights.ToString() << '\n';
  out << "# epoch\ttrain_loss\tval_loss\tlr\tseconds\n";
  for (const auto& r : result.log) {
    out << r.epoch << '\t' << FormatDouble(r.train_loss) << '\t'
        << FormatDouble(r.val_loss) << '\t' << FormatDouble(r.lr) << '\t'
        << FormatDouble(r.seconds) << '\n';
  }
  out << "# stop_reason=" << StopReasonName(result.stop_reason) << '\n';
  out << "# best_epoch=" << result.best_epoch << '\n';
  out << "# best_val_loss=" << FormatDouble(result.best_validation_loss) << '\n';
  return out.str();
}

}  // namespace osd::train
