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

#include "osd/layers.h"

#include <cmath>
#include <stdexcept>

namespace osd::nn {

Parameter& ParameterStore::Insert(const std::string& name, Matrix value) {
  if (Find(name)) throw std::logic_error("duplicate parameter " + name);
  params_.push_back(Parameter{name, std::move(value), Matrix()});
  params_.back().ZeroGrad();
  return params_.back();
}

double ParameterStore::Uniform01() {
  return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

Parameter& ParameterStore::AddWeight(const std::string& name, int rows,
                                     int cols, int fan_in, int fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w.data()[i] = (2.0 * Uniform01() - 1.0) * limit;
  return Insert(name, std::move(w));
}

Parameter& ParameterStore::AddConstant(const std::string& name, int rows,
                                       int cols, double value) {
  return Insert(name, Matrix::Constant(rows, cols, value));
}

Parameter* ParameterStore::Find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::Find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

int64_t ParameterStore::Count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void ParameterStore::ZeroGrad() {
  for (auto& p : params_) p.ZeroGrad();
}

Var ForwardContext::Drop(const Var& x) const {
  if (!training || dropout <= 0.0 || rng == nullptr) return x;
  return Dropout(x, dropout, *rng);
}

Linear Linear::Make(ParameterStore& ps, const std::string& name, int in,
                    int out, bool with_bias) {
  Linear l;
  l.weight = &ps.AddWeight(name + ".weight", in, out, in, out);
  if (with_bias) l.bias = &ps.AddConstant(name + ".bias", 1, out, 0.0);
  return l;
}

Var Linear::operator()(const Var& x) const {
  Var y = MatMul(x, Leaf(*weight));
  return bias ? AddRow(y, Leaf(*bias)) : y;
}

Norm Norm::Make(ParameterStore& ps, const std::string& name, int dim) {
  Norm n;
  n.gamma = &ps.AddConstant(name + ".gamma", 1, dim, 1.0);
  n.beta = &ps.AddConstant(name + ".beta", 1, dim, 0.0);
  return n;
}

Var Norm::operator()(const Var& x) const {
  return LayerNorm(x, Leaf(*gamma), Leaf(*beta));
}

Conv Conv::Make(ParameterStore& ps, const std::string& name, int in, int out,
                int kernel, int dilation) {
  Conv c;
  c.weight = &ps.AddWeight(name + ".weight", kernel * in, out, kernel * in,
                           kernel * out);
  c.bias = &ps.AddConstant(name + ".bias", 1, out, 0.0);
  c.kernel = kernel;
  c.dilation = dilation;
  return c;
}

Var Conv::operator()(const Var& x) const {
  return Conv1d(x, Leaf(*weight), Leaf(*bias), kernel, dilation);
}

DepthwiseConv DepthwiseConv::Make(ParameterStore& ps, const std::string& name,
                                  int channels, int kernel) {
  DepthwiseConv c;
  c.weight = &ps.AddWeight(name + ".weight", kernel, channels, kernel, kernel);
  c.bias = &ps.AddConstant(name + ".bias", 1, channels, 0.0);
  return c;
}

Var DepthwiseConv::operator()(const Var& x) const {
  return DepthwiseConv1d(x, Leaf(*weight), Leaf(*bias));
}

SelfAttention SelfAttention::Make(ParameterStore& ps, const std::string& name,
                                  int dim, int heads, bool relative) {
  if (heads <= 0 || dim % heads != 0)
    throw std::invalid_argument("attention: model_dim must be divisible by heads");
  SelfAttention a;
  a.query = Linear::Make(ps, name + ".query", dim, dim);
  a.key = Linear::Make(ps, name + ".key", dim, dim);
  a.value = Linear::Make(ps, name + ".value", dim, dim);
  a.output = Linear::Make(ps, name + ".output", dim, dim);
  a.heads = heads;
  a.relative = relative;
  if (relative) {
    a.position = Linear::Make(ps, name + ".position", dim, dim, false);
    const int dk = dim / heads;
    a.pos_bias_u = &ps.AddWeight(name + ".pos_bias_u", 1, dim, heads, dk);
    a.pos_bias_v = &ps.AddWeight(name + ".pos_bias_v", 1, dim, heads, dk);
  }
  return a;
}

Var SelfAttention::operator()(const Var& x, const ForwardContext& ctx) const {
  const auto frames = static_cast<int>(x.rows());
  const auto dim = static_cast<int>(x.cols());
  const int dk = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Var q = query(x);
  Var k = key(x);
  Var v = value(x);
  Var q_content = q;
  Var q_position;
  Var p;
  if (relative) {
    p = position(Constant(RelativePositions(frames, dim)));
    q_content = AddRow(q, Leaf(*pos_bias_u));
    q_position = AddRow(q, Leaf(*pos_bias_v));
  }

  Matrix mask;
  if (ctx.valid_frames > 0 && ctx.valid_frames < frames) {
    mask = Matrix::Zero(frames, frames);
    mask.rightCols(frames - ctx.valid_frames).setConstant(-1e30);
  }

  std::vector<Var> per_head;
  per_head.reserve(size_t(heads));
  for (int h = 0; h < heads; ++h) {
    Var kh = SliceCols(k, h * dk, dk);
    Var scores = MatMulTransposed(SliceCols(q_content, h * dk, dk), kh);
    if (relative) {
      Var bd = MatMulTransposed(SliceCols(q_position, h * dk, dk),
                                SliceCols(p, h * dk, dk));
      scores = Add(scores, RelShift(bd));
    }
    scores = Scale(scores, scale);
    if (mask.size()) scores = AddConstant(scores, mask);
    Var attn = ctx.Drop(SoftmaxRows(scores));
    per_head.push_back(MatMul(attn, SliceCols(v, h * dk, dk)));
  }
  return output(ConcatCols(per_head));
}

FeedForward FeedForward::Make(ParameterStore& ps, const std::string& name,
                              int dim, int hidden, Activation act) {
  FeedForward f;
  f.in = Linear::Make(ps, name + ".in", dim, hidden);
  f.out = Linear::Make(ps, name + ".out", hidden, dim);
  f.activation = act;
  return f;
}

Var FeedForward::operator()(const Var& x, const ForwardContext& ctx) const {
  Var h = in(x);
  h = activation == Activation::kRelu ? Relu(h) : Silu(h);
  return out(ctx.Drop(h));
}

LstmDirection LstmDirection::Make(ParameterStore& ps, const std::string& name,
                                  int in, int hidden) {
  LstmDirection d;
  d.hidden = hidden;
  d.w_input = &ps.AddWeight(name + ".w_input", in, 4 * hidden, in, hidden);
  d.w_recurrent =
      &ps.AddWeight(name + ".w_recurrent", hidden, 4 * hidden, hidden, hidden);
  d.bias = &ps.AddConstant(name + ".bias", 1, 4 * hidden, 0.0);
  // Forget-gate bias starts at 1.
  d.bias->value.middleCols(hidden, hidden).setOnes();
  return d;
}

Var LstmDirection::operator()(const Var& x, bool reverse) const {
  const auto frames = static_cast<int>(x.rows());
  const int h4 = 4 * hidden;
  Var projected = AddRow(MatMul(x, Leaf(*w_input)), Leaf(*bias));
  Var recurrent = Leaf(*w_recurrent);
  Var h = Constant(Matrix::Zero(1, hidden));
  Var c = Constant(Matrix::Zero(1, hidden));
  std::vector<Var> out(static_cast<size_t>(frames));
  for (int s = 0; s < frames; ++s) {
    const int t = reverse ? frames - 1 - s : s;
    Var gates = Add(SliceRows(projected, t, 1), MatMul(h, recurrent));
    Var i = Sigmoid(SliceCols(gates, 0, hidden));
    Var f = Sigmoid(SliceCols(gates, hidden, hidden));
    Var g = Tanh(SliceCols(gates, 2 * hidden, hidden));
    Var o = Sigmoid(SliceCols(gates, 3 * hidden, h4 - 3 * hidden));
    c = Add(Mul(f, c), Mul(i, g));
    h = Mul(o, Tanh(c));
    out[size_t(t)] = h;
  }
  return ConcatRows(out);
}

namespace {

double PositionAngle(double pos, int col, int dim) {
  const int pair = col / 2;
  return pos / std::pow(10000.0, 2.0 * pair / dim);
}

}  // namespace

Matrix SinusoidalPositions(int frames, int dim) {
  Matrix pe(frames, dim);
  for (int t = 0; t < frames; ++t)
    for (int c = 0; c < dim; ++c) {
      const double a = PositionAngle(t, c, dim);
      pe(t, c) = c % 2 == 0 ? std::sin(a) : std::cos(a);
    }
  return pe;
}

Matrix RelativePositions(int frames, int dim) {
  Matrix pe(2 * frames - 1, dim);
  for (int p = 0; p < 2 * frames - 1; ++p) {
    const double rel = static_cast<double>(frames - 1 - p);
    for (int c = 0; c < dim; ++c) {
      const double a = PositionAngle(rel, c, dim);
      pe(p, c) = c % 2 == 0 ? std::sin(a) : std::cos(a);
    }
  }
  return pe;
}

}  // namespace osd::nn
