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

#ifndef OSD_AUTOGRAD_H_
#define OSD_AUTOGRAD_H_

// Reverse-mode automatic differentiation over dense double matrices.
//
// Sequences are laid out frames x channels (one row per frame). Every op
// builds a node holding its value, its parents and a closure that pushes the
// node's gradient into the parents. Backward() visits nodes in reverse
// creation order, which is a valid topological order for this graph.
//
// Under NoGradGuard nodes keep no parents, so intermediate values are freed
// as soon as the forward pass drops them.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace osd::nn {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Eigen::Index size() const { return value.size(); }
  void ZeroGrad() { grad.setZero(value.rows(), value.cols()); }
};

struct Node {
  Matrix value;
  Matrix grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  Parameter* param = nullptr;
  uint64_t id = 0;
  bool requires_grad = false;

  // Gradient buffer, zero-initialised on first use.
  Matrix& Grad();
  const Matrix& parent_value(size_t i) const { return parents[i]->value; }
  // Adds g to parent i's gradient when that parent needs one.
  void Push(size_t i, const Matrix& g);
  bool parent_needs_grad(size_t i) const { return parents[i]->requires_grad; }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

Var Constant(Matrix value);
// Leaf bound to a parameter; Backward() accumulates into param.grad.
Var Leaf(Parameter& param);

// Seeds d(root)/d(root) = seed and back-propagates through the graph.
void Backward(const Var& root, double seed = 1.0);

// Linear algebra.
Var MatMul(const Var& a, const Var& b);
Var MatMulTransposed(const Var& a, const Var& b);  // a * b^T
Var Transpose(const Var& a);
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);  // elementwise
Var Scale(const Var& a, double s);
Var AddRow(const Var& a, const Var& row);  // broadcast a 1 x n row
Var AddConstant(const Var& a, const Matrix& c);

// Elementwise nonlinearities.
Var Relu(const Var& a);
Var Sigmoid(const Var& a);
Var Tanh(const Var& a);
Var Silu(const Var& a);

// Row-wise ops.
Var LayerNorm(const Var& x, const Var& gamma, const Var& beta,
              double eps = 1e-5);
Var SoftmaxRows(const Var& x);

// Structural ops.
Var SliceCols(const Var& x, Eigen::Index start, Eigen::Index count);
Var SliceRows(const Var& x, Eigen::Index start, Eigen::Index count);
Var ConcatCols(std::span<const Var> parts);
Var ConcatRows(std::span<const Var> parts);

// 1-D convolution over frames with zero "same" padding. Kernel layout is
// (kernel * in_channels) x out_channels with tap k occupying rows
// [k * in, (k + 1) * in); tap k reads frame t + (k - (kernel - 1) / 2) * dilation.
Var Conv1d(const Var& x, const Var& weight, const Var& bias, int kernel,
           int dilation);
// Per-channel convolution; weight is kernel x channels.
Var DepthwiseConv1d(const Var& x, const Var& weight, const Var& bias,
                    int dilation = 1);

// Relative-position shift: x is T x (2T - 1) with column p holding relative
// distance (T - 1 - p); result(i, j) = x(i, T - 1 - i + j).
Var RelShift(const Var& x);

// Inverted dropout; identity when p == 0.
Var Dropout(const Var& x, double p, std::mt19937_64& rng);

// Sum over valid frames of -w[y] * log softmax(logits)[y]; logits are
// frames x classes. Returns a 1 x 1 node.
Var WeightedNllSum(const Var& logits, std::span<const uint8_t> targets,
                   std::span<const double> class_weights, int valid_frames);

}  // namespace osd::nn

#endif  // OSD_AUTOGRAD_H_
