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

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.h"
#include "osd/error.h"
#include "osd/train_loop.h"

using namespace osd;
using namespace osd::train;

namespace {

ScheduleHooks Stub(std::vector<double> val, std::vector<double>* lrs = nullptr) {
  auto seq = std::make_shared<std::vector<double>>(std::move(val));
  auto i = std::make_shared<size_t>(0);
  ScheduleHooks h;
  h.train_epoch = [lrs](int, double lr) {
    if (lrs) lrs->push_back(lr);
    return 1.0;
  };
  h.validate = [seq, i] {
    const double v = (*seq)[std::min(*i, seq->size() - 1)];
    ++*i;
    return v;
  };
  return h;
}

// Separable toy data: each class has its own mean in a few mel bins.
std::vector<Example> ToyExamples(int count, int frames, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<Example> out;
  for (int n = 0; n < count; ++n) {
    Example ex;
    ex.features.values.resize(64, frames);
    ex.features.valid_frames = frames;
    ex.labels.labels.resize(size_t(frames));
    ex.labels.valid_frames = frames;
    uint8_t cls = 0;
    for (int t = 0; t < frames; ++t) {
      if (t % 8 == 0) cls = uint8_t(rng() % 3);
      ex.labels.labels[size_t(t)] = cls;
      for (int b = 0; b < 64; ++b)
        ex.features.values(b, t) = noise(rng) + (b / 21 == cls ? 2.0 : -1.0);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

TrainConfig Small(uint64_t seed = 1) {
  TrainConfig c;
  c.batch_size = 2;
  c.max_epochs = 4;
  c.seed = seed;
  c.initial_lr = 3e-3;
  return c;
}

}  // namespace

TEST_SUITE("train_loop") {

TEST_CASE("six non-improving validations stop training") {
  const auto r = RunSchedule(TrainConfig{}, Stub({5, 4, 4, 4, 4, 4, 4, 4}));
  CHECK(r.stop_reason == StopReason::kEarlyStop);
  CHECK(r.log.size() == 8);
  CHECK(r.best_epoch == 2);
  CHECK(StopReasonName(r.stop_reason) == "early_stop");
}

TEST_CASE("always improving runs to the epoch cap") {
  std::vector<double> seq;
  for (int i = 0; i < 200; ++i) seq.push_back(100.0 - 0.1 * i);
  const auto r = RunSchedule(TrainConfig{}, Stub(seq));
  CHECK(r.stop_reason == StopReason::kMaxEpochs);
  CHECK(r.log.size() == 100);
  CHECK(StopReasonName(r.stop_reason) == "max_epochs");
}

TEST_CASE("learning rate decays by ten on each non-improvement") {
  std::vector<double> lrs;
  RunSchedule(TrainConfig{}, Stub({5, 6, 4, 7, 3, 3, 3, 3, 3, 3}, &lrs));
  int k = 0;
  const std::vector<double> val{5, 6, 4, 7, 3, 3, 3, 3, 3, 3};
  double best = INFINITY;
  for (size_t e = 0; e < lrs.size(); ++e) {
    CHECK(lrs[e] == doctest::Approx(1e-3 * std::pow(0.1, k)).epsilon(1e-12));
    if (val[e] < best) best = val[e];
    else ++k;
  }
}

TEST_CASE("patience counter never exceeds the limit") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> seq;
    for (int i = 0; i < 120; ++i) seq.push_back(double(rng() % 10));
    auto hooks = Stub(seq);
    int max_counter = 0;
    hooks.on_epoch_end = [&](const TrainState& s) { max_counter = std::max(max_counter, s.epochs_since_improvement); };
    RunSchedule(TrainConfig{}, hooks);
    CHECK(max_counter <= 6);
  }
}

TEST_CASE("non-finite losses raise divergence") {
  CHECK_THROWS_AS(RunSchedule(TrainConfig{}, Stub({3, NAN})), DivergenceError);
  auto hooks = Stub({3, 2});
  hooks.train_epoch = [](int e, double) { return e == 2 ? INFINITY : 1.0; };
  CHECK_THROWS_AS(RunSchedule(TrainConfig{}, hooks), DivergenceError);
}

TEST_CASE("config validation and key-value round trip") {
  TrainConfig c;
  c.batch_size = 7;
  c.weights_mode = WeightsMode::kExplicit;
  c.explicit_weights = ClassWeights{{2, 1, 3}};
  c.seed = 99;
  const auto back = TrainConfig::FromKeyValues(c.ToKeyValues());
  CHECK(back.batch_size == 7);
  CHECK(back.weights_mode == WeightsMode::kExplicit);
  CHECK(back.explicit_weights.w == c.explicit_weights.w);
  CHECK(back.seed == 99);
  c.early_stop_patience = 0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = TrainConfig{};
  c.lr_decay = 1.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}

TEST_CASE("Adam takes a learning-rate sized first step") {
  nn::ParameterStore ps(1);
  auto& p = ps.AddConstant("p", 1, 3, 0.0);
  p.grad << 0.5, -2.0, 1e-3;
  AdamOptimizer adam(ps, 0.9, 0.999, 1e-8);
  adam.Step(0.01);
  CHECK(p.value(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p.value(0, 2) == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(adam.steps() == 1);
}

TEST_CASE("training lowers the loss and is reproducible") {
  const auto train = ToyExamples(6, 40, 1);
  const auto val = ToyExamples(2, 40, 2);
  auto run = [&] {
    models::OsdModel model(testing::ToyConfig(models::Family::kCF, 4));
    Trainer trainer(model, Small(), ClassWeights{});
    const double before = trainer.Evaluate(val);
    const auto r = trainer.Fit(train, val);
    return std::make_pair(before, r);
  };
  const auto [before, a] = run();
  const auto [before2, b] = run();
  REQUIRE(a.log.size() == b.log.size());
  for (size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_loss == b.log[e].train_loss);
    CHECK(a.log[e].val_loss == b.log[e].val_loss);
  }
  CHECK(a.best_validation_loss < before);
}

TEST_CASE("fit restores the best validation parameters") {
  const auto train = ToyExamples(4, 30, 3);
  const auto val = ToyExamples(2, 30, 4);
  models::OsdModel model(testing::ToyConfig(models::Family::kTCN, 2));
  Trainer trainer(model, Small(2), ClassWeights{{2, 1, 3}});
  const auto r = trainer.Fit(train, val);
  CHECK(trainer.Evaluate(val) == doctest::Approx(r.best_validation_loss).epsilon(1e-12));
}

TEST_CASE("log has one record per epoch and a stop reason") {
  TrainResult r;
  r.log.push_back({1, 0.5, 0.6, 1e-3, 0.25, true});
  r.log.push_back({2, 0.4, 0.7, 1e-4, 0.25, false});
  r.best_epoch = 1;
  r.best_validation_loss = 0.6;
  KeyValueConfig extra;
  extra.Set("param_count", "42");
  const std::string text = FormatTrainingLog(r, extra);
  CHECK(text.find("# param_count=42\n") != std::string::npos);
  CHECK(text.find("# epoch\ttrain_loss\tval_loss\tlr\tseconds\n") != std::string::npos);
  CHECK(text.find("2\t0.4\t0.7\t" + FormatDouble(1e-4) + "\t0.25\n") != std::string::npos);
  CHECK(text.find("# stop_reason=max_epochs\n") != std::string::npos);
  CHECK(text.find("# best_epoch=1\n") != std::string::npos);
}

}
