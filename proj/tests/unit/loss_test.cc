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

#include "oracles.h"
#include "osd/error.h"
#include "osd/loss.h"

using namespace osd;
using namespace osd::train;

namespace {

struct Batch {
  std::vector<Eigen::MatrixXd> logits;
  std::vector<std::vector<uint8_t>> targets, masks;
  std::vector<LossInput> inputs() const {
    std::vector<LossInput> in;
    for (size_t i = 0; i < logits.size(); ++i) in.push_back({&logits[i], targets[i], masks[i]});
    return in;
  }
};

Batch RandomBatch(std::mt19937_64& rng, int n, int frames, double scale = 3.0) {
  std::normal_distribution<double> g(0.0, scale);
  Batch b;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd z(3, frames);
    for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = g(rng);
    std::vector<uint8_t> y(static_cast<size_t>(frames)), m(static_cast<size_t>(frames));
    for (auto& v : y) v = uint8_t(rng() % 3);
    for (auto& v : m) v = rng() % 5 != 0;
    m[0] = 1;
    b.logits.push_back(z);
    b.targets.push_back(y);
    b.masks.push_back(m);
  }
  return b;
}

annotations::DatasetStats StatsFor(int64_t s, int64_t o, int64_t v) {
  return annotations::StatsFromCounts({s, o, v}, 0.01);
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("equal logits give ln 3") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Constant(3, 50, 0.7);
  std::vector<uint8_t> y(50), m(50, 1);
  for (size_t i = 0; i < 50; ++i) y[i] = uint8_t(i % 3);
  const LossInput in{&z, y, m};
  CHECK(std::abs(WeightedCrossEntropy({&in, 1}, ClassWeights{}) - std::log(3.0)) < 1e-9);
}

TEST_CASE("one confident frame and weight cancellation") {
  Eigen::MatrixXd z(3, 1);
  z << 0, 0, 10;
  std::vector<uint8_t> y{2}, m{1};
  const LossInput in{&z, y, m};
  const double want = -std::log(std::exp(10.0) / (2.0 + std::exp(10.0)));
  CHECK(want == doctest::Approx(9.08e-5).epsilon(1e-3));
  CHECK(WeightedCrossEntropy({&in, 1}, ClassWeights{}) == doctest::Approx(want).epsilon(1e-12));
  CHECK(WeightedCrossEntropy({&in, 1}, ClassWeights{{3.5, 1.0, 7.0}}) ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("random batches match the long-double oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto b = RandomBatch(rng, 32, 40);
    const ClassWeights w{{0.5 + double(rng() % 100) / 20, 1.0, 0.5 + double(rng() % 100) / 10}};
    const auto in = b.inputs();
    const double got = WeightedCrossEntropy(in, w);
    const long double want = testing::LossOracle(b.logits, b.targets, b.masks, w.w);
    CHECK(std::abs(got - double(want)) <= 1e-6 * std::abs(double(want)));
  }
}

TEST_CASE("masked frames contribute nothing") {
  std::mt19937_64 rng(22);
  auto b = RandomBatch(rng, 4, 30);
  const ClassWeights w{{2.0, 1.0, 5.0}};
  const double before = WeightedCrossEntropy(b.inputs(), w);
  for (size_t i = 0; i < b.logits.size(); ++i)
    for (size_t t = 0; t < 30; ++t)
      if (!b.masks[i][t]) b.logits[i].col(Eigen::Index(t)).setConstant(1e6 * double(t + 1));
  CHECK(WeightedCrossEntropy(b.inputs(), w) == before);
}

TEST_CASE("gradient with respect to logits matches finite differences") {
  std::mt19937_64 rng(23);
  auto b = RandomBatch(rng, 3, 12, 1.0);
  const ClassWeights w{{3.5, 1.0, 7.0}};
  std::vector<Eigen::MatrixXd> grads;
  WeightedCrossEntropyWithGrad(b.inputs(), w, grads);
  REQUIRE(grads.size() == 3);
  double worst = 0.0;
  const double h = 1e-6;
  for (size_t i = 0; i < 3; ++i)
    for (Eigen::Index k = 0; k < b.logits[i].size(); ++k) {
      const double keep = b.logits[i].data()[k];
      b.logits[i].data()[k] = keep + h;
      const double up = WeightedCrossEntropy(b.inputs(), w);
      b.logits[i].data()[k] = keep - h;
      const double down = WeightedCrossEntropy(b.inputs(), w);
      b.logits[i].data()[k] = keep;
      const double num = (up - down) / (2 * h), ana = grads[i].data()[k];
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
    }
  CHECK(worst < 1e-4);
}

TEST_CASE("scaling every weight leaves loss and gradient unchanged") {
  std::mt19937_64 rng(24);
  const auto b = RandomBatch(rng, 5, 20);
  const ClassWeights w{{2.0, 1.0, 6.0}}, w10{{20.0, 10.0, 60.0}};
  std::vector<Eigen::MatrixXd> g1, g2;
  const double l1 = WeightedCrossEntropyWithGrad(b.inputs(), w, g1);
  const double l2 = WeightedCrossEntropyWithGrad(b.inputs(), w10, g2);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  for (size_t i = 0; i < g1.size(); ++i) CHECK((g1[i] - g2[i]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("non-finite logits and empty masks are errors") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 2);
  std::vector<uint8_t> y{0, 1}, m{1, 1}, none{0, 0};
  z(1, 1) = std::nan("");
  LossInput in{&z, y, m};
  CHECK_THROWS_AS(WeightedCrossEntropy({&in, 1}, ClassWeights{}), DivergenceError);
  z.setZero();
  in.mask = none;
  CHECK_THROWS_AS(WeightedCrossEntropy({&in, 1}, ClassWeights{}), DataError);
  const ClassWeights zero{{1.0, 0.0, 1.0}};
  CHECK_THROWS_AS(zero.Validate(), ConfigError);
}

TEST_CASE("inverse frequency weights from 2:7:1 proportions") {
  const auto w = DeriveWeights(StatsFor(200, 700, 100), WeightsMode::kInverseFrequency);
  CHECK(w.w[0] == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(w.w[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.w[2] == doctest::Approx(7.0).epsilon(1e-12));
  const auto eq = DeriveWeights(StatsFor(5, 5, 5), WeightsMode::kInverseFrequency);
  for (double v : eq.w) CHECK(v == doctest::Approx(1.0));
  const auto uni = DeriveWeights(StatsFor(200, 700, 100), WeightsMode::kUniform);
  for (double v : uni.w) CHECK(v == 1.0);
  const auto ex = DeriveWeights(StatsFor(1, 1, 1), WeightsMode::kExplicit, ClassWeights{{2, 3, 4}});
  CHECK(ex.w[2] == 4.0);
}

TEST_CASE("a class without frames needs a fallback weight") {
  CHECK_THROWS_AS(DeriveWeights(StatsFor(300, 700, 0), WeightsMode::kInverseFrequency), DataError);
  const auto w = DeriveWeights(StatsFor(300, 700, 0), WeightsMode::kInverseFrequency, {}, 9.0);
  CHECK(w.w[2] == 9.0);
}

TEST_CASE("weights text round-trips") {
  const ClassWeights w{{3.5, 1.0, 7.25}};
  CHECK(ClassWeights::Parse(w.ToString()).w == w.w);
  CHECK_THROWS_AS(ClassWeights::Parse("1,2"), ConfigError);
  CHECK(ParseWeightsMode(WeightsModeName(WeightsMode::kInverseFrequency)) == WeightsMode::kInverseFrequency);
}

}
