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

#include <benchmark/benchmark.h>

#include <random>

#include "osd/audio_features.h"
#include "osd/augment.h"
#include "osd/model_zoo.h"

namespace {

std::vector<double> Noise(size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

void BM_FbankSegment(benchmark::State& state) {
  const osd::audio::FbankComputer fbank;
  const auto x = Noise(64000);
  for (auto _ : state) benchmark::DoNotOptimize(fbank.ComputeSegment(x));
}
BENCHMARK(BM_FbankSegment)->Unit(benchmark::kMillisecond);

void BM_Convolve(benchmark::State& state) {
  const auto x = Noise(64000);
  const auto h = Noise(size_t(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(osd::augment::Convolve(x, h));
}
BENCHMARK(BM_Convolve)->Arg(16)->Arg(8000)->Unit(benchmark::kMillisecond);

// Evaluation-mode forward of one 4 s segment at the default model sizes.
void BM_Forward(benchmark::State& state) {
  const auto family = static_cast<osd::models::Family>(state.range(0));
  const osd::models::OsdModel model(osd::models::ModelConfig::Default(family));
  osd::audio::FeatureMatrix f;
  f.values = Eigen::MatrixXd::Random(64, 400);
  f.valid_frames = 400;
  for (auto _ : state) benchmark::DoNotOptimize(model.Predict(f));
  state.SetLabel(osd::models::FamilyName(family));
}
BENCHMARK(BM_Forward)
    ->Arg(int(osd::models::Family::kTF))
    ->Arg(int(osd::models::Family::kTCN))
    ->Arg(int(osd::models::Family::kCF))
    ->Arg(int(osd::models::Family::kROSD))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
