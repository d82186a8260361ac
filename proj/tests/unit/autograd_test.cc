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
#include <functional>
#include <random>

#include "osd/autograd.h"

using namespace osd::nn;

namespace {

Matrix RandomMatrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Scalar readout <R, f(x)> with a fixed random R, so every output entry
// carries a distinct gradient.
double MaxRelGradError(std::vector<Parameter*> params,
                       const std::function<Var()>& build, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Var probe = [&] {
    NoGradGuard g;
    return build();
  }();
  const Matrix readout = RandomMatrix(int(probe.rows()), int(probe.cols()), rng);
  auto scalar = [&](const Var& y) {
    return MatMul(MatMul(Constant(Matrix::Ones(1, y.rows())), Mul(y, Constant(readout))),
                  Constant(Matrix::Ones(y.cols(), 1)));
  };
  for (auto* p : params) p->ZeroGrad();
  Backward(scalar(build()));
  double worst = 0.0;
  const double h = 1e-6;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double keep = p->value.data()[i];
      NoGradGuard g;
      p->value.data()[i] = keep + h;
      const double up = scalar(build()).value()(0, 0);
      p->value.data()[i] = keep - h;
      const double down = scalar(build()).value()(0, 0);
      p->value.data()[i] = keep;
      const double num = (up - down) / (2 * h);
      const double ana = p->grad.data()[i];
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
    }
  }
  return worst;
}

Parameter Param(const std::string& name, Matrix v) {
  Parameter p{name, std::move(v), Matrix()};
  p.ZeroGrad();
  return p;
}

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("matrix products and elementwise ops") {
  std::mt19937_64 rng(1);
  auto a = Param("a", RandomMatrix(5, 4, rng));
  auto b = Param("b", RandomMatrix(4, 3, rng));
  auto c = Param("c", RandomMatrix(5, 3, rng));
  auto r = Param("r", RandomMatrix(1, 3, rng));
  CHECK(MaxRelGradError({&a, &b, &c, &r}, [&] {
          Var y = MatMul(Leaf(a), Leaf(b));
          y = Add(Mul(y, Leaf(c)), Sub(Leaf(c), Scale(y, 0.3)));
          return AddRow(y, Leaf(r));
        }, 2) < 1e-5);
  CHECK(MaxRelGradError({&a}, [&] {
          return Transpose(MatMulTransposed(Leaf(a), Leaf(a)));
        }, 3) < 1e-5);
}

TEST_CASE("nonlinearities") {
  std::mt19937_64 rng(4);
  auto x = Param("x", RandomMatrix(6, 5, rng, 2.0));
  CHECK(MaxRelGradError({&x}, [&] { return Sigmoid(Leaf(x)); }, 5) < 1e-5);
  CHECK(MaxRelGradError({&x}, [&] { return Tanh(Leaf(x)); }, 6) < 1e-5);
  CHECK(MaxRelGradError({&x}, [&] { return Silu(Leaf(x)); }, 7) < 1e-5);
  CHECK(MaxRelGradError({&x}, [&] { return Relu(Leaf(x)); }, 8) < 1e-5);
  CHECK(MaxRelGradError({&x}, [&] { return SoftmaxRows(Leaf(x)); }, 9) < 1e-5);
}

TEST_CASE("layer norm") {
  std::mt19937_64 rng(10);
  auto x = Param("x", RandomMatrix(4, 6, rng));
  auto g = Param("g", RandomMatrix(1, 6, rng));
  auto b = Param("b", RandomMatrix(1, 6, rng));
  CHECK(MaxRelGradError({&x, &g, &b}, [&] { return LayerNorm(Leaf(x), Leaf(g), Leaf(b)); }, 11) < 1e-5);
  NoGradGuard guard;
  const Matrix y = LayerNorm(Leaf(x), Constant(Matrix::Ones(1, 6)), Constant(Matrix::Zero(1, 6))).value();
  for (int i = 0; i < 4; ++i) CHECK(std::abs(y.row(i).mean()) < 1e-12);
}

TEST_CASE("slicing and concatenation") {
  std::mt19937_64 rng(12);
  auto x = Param("x", RandomMatrix(5, 6, rng));
  CHECK(MaxRelGradError({&x}, [&] {
          std::vector<Var> parts{SliceCols(Leaf(x), 4, 2), SliceCols(Leaf(x), 0, 3)};
          std::vector<Var> rows{SliceRows(ConcatCols(parts), 1, 3), SliceRows(ConcatCols(parts), 0, 2)};
          return ConcatRows(rows);
        }, 13) < 1e-5);
}

TEST_CASE("convolutions follow the tap layout") {
  std::mt19937_64 rng(14);
  auto x = Param("x", RandomMatrix(7, 3, rng));
  auto w = Param("w", RandomMatrix(3 * 3, 2, rng));
  auto bias = Param("bias", RandomMatrix(1, 2, rng));
  CHECK(MaxRelGradError({&x, &w, &bias}, [&] { return Conv1d(Leaf(x), Leaf(w), Leaf(bias), 3, 2); }, 15) < 1e-5);
  auto dw = Param("dw", RandomMatrix(5, 3, rng));
  auto db = Param("db", RandomMatrix(1, 3, rng));
  CHECK(MaxRelGradError({&x, &dw, &db}, [&] { return DepthwiseConv1d(Leaf(x), Leaf(dw), Leaf(db)); }, 16) < 1e-5);

  NoGradGuard guard;
  const Matrix y = Conv1d(Leaf(x), Leaf(w), Leaf(bias), 3, 2).value();
  for (int t = 0; t < 7; ++t)
    for (int o = 0; o < 2; ++o) {
      double s = bias.value(0, o);
      for (int k = 0; k < 3; ++k) {
        const int src = t + (k - 1) * 2;
        if (src < 0 || src >= 7) continue;
        for (int i = 0; i < 3; ++i) s += x.value(src, i) * w.value(k * 3 + i, o);
      }
      CHECK(y(t, o) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("relative shift picks the diagonal band") {
  std::mt19937_64 rng(17);
  auto x = Param("x", RandomMatrix(4, 7, rng));
  CHECK(MaxRelGradError({&x}, [&] { return RelShift(Leaf(x)); }, 18) < 1e-5);
  NoGradGuard guard;
  const Matrix y = RelShift(Leaf(x)).value();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(y(i, j) == x.value(i, 3 - i + j));
}

TEST_CASE("weighted NLL sum counts valid frames only") {
  std::mt19937_64 rng(19);
  auto z = Param("z", RandomMatrix(6, 3, rng));
  const std::vector<uint8_t> y{0, 2, 1, 2, 0, 1};
  const std::vector<double> w{1.5, 1.0, 2.5};
  CHECK(MaxRelGradError({&z}, [&] { return WeightedNllSum(Leaf(z), y, w, 4); }, 20) < 1e-5);
  NoGradGuard guard;
  double expect = 0.0;
  for (int t = 0; t < 4; ++t) {
    const double lse = std::log(z.value.row(t).array().exp().sum());
    expect += w[y[size_t(t)]] * (lse - z.value(t, y[size_t(t)]));
  }
  CHECK(WeightedNllSum(Leaf(z), y, w, 4).value()(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("dropout zero is identity and keeps the expectation otherwise") {
  std::mt19937_64 rng(21);
  const Matrix x = Matrix::Ones(200, 50);
  NoGradGuard guard;
  CHECK((Dropout(Constant(x), 0.0, rng).value().array() == x.array()).all());
  const Matrix y = Dropout(Constant(x), 0.25, rng).value();
  CHECK(y.mean() == doctest::Approx(1.0).epsilon(0.03));
  CHECK(((y.array() == 0.0) || (y.array() == 1.0 / 0.75)).all());
}

TEST_CASE("no-grad mode records no parents") {
  Parameter p = Param("p", Matrix::Ones(2, 2));
  NoGradGuard guard;
  CHECK_FALSE(GradEnabled());
  Var y = MatMul(Leaf(p), Leaf(p));
  CHECK(y.node()->parents.empty());
}

}
