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

#ifndef OSD_LAYERS_H_
#define OSD_LAYERS_H_

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "osd/autograd.h"

namespace osd::nn {

// Owns parameters in registration order. Addresses stay stable because the
// store never relocates elements.
class ParameterStore {
 public:
  explicit ParameterStore(uint64_t seed = 0) : rng_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  // Xavier-uniform weight.
  Parameter& AddWeight(const std::string& name, int rows, int cols,
                       int fan_in, int fan_out);
  Parameter& AddConstant(const std::string& name, int rows, int cols,
                         double value);

  Parameter* Find(const std::string& name);
  const Parameter* Find(const std::string& name) const;
  int64_t Count() const;
  void ZeroGrad();

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }

 private:
  Parameter& Insert(const std::string& name, Matrix value);
  // Uniform in [0, 1) from raw engine bits, independent of the standard
  // library's distribution implementations.
  double Uniform01();

  std::mt19937_64 rng_;
  std::deque<Parameter> params_;
};

struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
  int valid_frames = 0;

  Var Drop(const Var& x) const;
};

struct Linear {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // 1 x out, may be null

  static Linear Make(ParameterStore& ps, const std::string& name, int in,
                     int out, bool with_bias = true);
  Var operator()(const Var& x) const;
};

struct Norm {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;

  static Norm Make(ParameterStore& ps, const std::string& name, int dim);
  Var operator()(const Var& x) const;
};

struct Conv {
  Parameter* weight = nullptr;  // (kernel * in) x out
  Parameter* bias = nullptr;
  int kernel = 1;
  int dilation = 1;

  static Conv Make(ParameterStore& ps, const std::string& name, int in, int out,
                   int kernel, int dilation);
  Var operator()(const Var& x) const;
};

struct DepthwiseConv {
  Parameter* weight = nullptr;  // kernel x channels
  Parameter* bias = nullptr;

  static DepthwiseConv Make(ParameterStore& ps, const std::string& name,
                            int channels, int kernel);
  Var operator()(const Var& x) const;
};

// Multi-head self-attention. With relative positions enabled it adds the
// content/position bias vectors and a projected sinusoidal relative
// embedding, as in Transformer-XL style Conformer attention.
struct SelfAttention {
  Linear query, key, value, output;
  Linear position;                // relative only, no bias
  Parameter* pos_bias_u = nullptr;  // 1 x d
  Parameter* pos_bias_v = nullptr;  // 1 x d
  int heads = 1;
  bool relative = false;

  static SelfAttention Make(ParameterStore& ps, const std::string& name,
                            int dim, int heads, bool relative);
  Var operator()(const Var& x, const ForwardContext& ctx) const;
};

// Linear -> activation -> dropout -> Linear.
struct FeedForward {
  enum class Activation { kRelu, kSwish };
  Linear in, out;
  Activation activation = Activation::kRelu;

  static FeedForward Make(ParameterStore& ps, const std::string& name, int dim,
                          int hidden, Activation act);
  Var operator()(const Var& x, const ForwardContext& ctx) const;
};

// One LSTM direction, gate order (input, forget, cell, output).
struct LstmDirection {
  Parameter* w_input = nullptr;      // in x 4h
  Parameter* w_recurrent = nullptr;  // h x 4h
  Parameter* bias = nullptr;         // 1 x 4h
  int hidden = 0;

  static LstmDirection Make(ParameterStore& ps, const std::string& name,
                            int in, int hidden);
  // Runs over all rows of x, front to back or back to front; output rows are
  // in input order.
  Var operator()(const Var& x, bool reverse) const;
};

// T x d sinusoidal table for absolute positions 0..T-1.
Matrix SinusoidalPositions(int frames, int dim);
// (2T-1) x d table; row p encodes relative distance T - 1 - p.
Matrix RelativePositions(int frames, int dim);

}  // namespace osd::nn

#endif  // OSD_LAYERS_H_
