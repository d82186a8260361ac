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

#include "osd/autograd.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace osd::nn {
namespace {

thread_local bool g_grad_enabled = true;
thread_local uint64_t g_next_id = 1;

using NodePtr = std::shared_ptr<Node>;

Var MakeResult(Matrix value, std::vector<NodePtr> parents,
               std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->id = g_next_id++;
  if (g_grad_enabled) {
    const bool needs = std::any_of(parents.begin(), parents.end(),
                                   [](const NodePtr& p) { return p->requires_grad; });
    if (needs) {
      node->requires_grad = true;
      node->parents = std::move(parents);
      node->backward = std::move(backward);
    }
  }
  return Var(std::move(node));
}

void CheckSameShape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
}

double Sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Matrix& Node::Grad() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols())
    grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

void Node::Push(size_t i, const Matrix& g) {
  if (parents[i]->requires_grad) parents[i]->Grad() += g;
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var Constant(Matrix value) { return MakeResult(std::move(value), {}, nullptr); }

Var Leaf(Parameter& param) {
  auto node = std::make_shared<Node>();
  node->value = param.value;
  node->id = g_next_id++;
  if (g_grad_enabled) {
    node->requires_grad = true;
    node->param = &param;
  }
  return Var(std::move(node));
}

void Backward(const Var& root, double seed) {
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->id > b->id; });

  root.node()->Grad().setConstant(seed);
  for (Node* n : order) {
    if (n->grad.size() == 0) continue;
    if (n->backward) n->backward(*n);
    if (n->param) {
      if (n->param->grad.rows() != n->value.rows() ||
          n->param->grad.cols() != n->value.cols())
        n->param->ZeroGrad();
      n->param->grad += n->grad;
    }
    n->grad.resize(0, 0);
  }
}

Var MatMul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("MatMul: inner dims differ");
  return MakeResult(a.value() * b.value(), {a.node(), b.node()}, [](Node& n) {
    if (n.parent_needs_grad(0)) n.Push(0, n.grad * n.parent_value(1).transpose());
    if (n.parent_needs_grad(1)) n.Push(1, n.parent_value(0).transpose() * n.grad);
  });
}

Var MatMulTransposed(const Var& a, const Var& b) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("MatMulTransposed: inner dims differ");
  return MakeResult(a.value() * b.value().transpose(), {a.node(), b.node()},
                    [](Node& n) {
                      if (n.parent_needs_grad(0)) n.Push(0, n.grad * n.parent_value(1));
                      if (n.parent_needs_grad(1))
                        n.Push(1, n.grad.transpose() * n.parent_value(0));
                    });
}

Var Transpose(const Var& a) {
  return MakeResult(a.value().transpose(), {a.node()},
                    [](Node& n) { n.Push(0, n.grad.transpose()); });
}

Var Add(const Var& a, const Var& b) {
  CheckSameShape(a, b, "Add");
  return MakeResult(a.value() + b.value(), {a.node(), b.node()}, [](Node& n) {
    n.Push(0, n.grad);
    n.Push(1, n.grad);
  });
}

Var Sub(const Var& a, const Var& b) {
  CheckSameShape(a, b, "Sub");
  return MakeResult(a.value() - b.value(), {a.node(), b.node()}, [](Node& n) {
    n.Push(0, n.grad);
    if (n.parent_needs_grad(1)) n.Push(1, -n.grad);
  });
}

Var Mul(const Var& a, const Var& b) {
  CheckSameShape(a, b, "Mul");
  return MakeResult(a.value().cwiseProduct(b.value()), {a.node(), b.node()},
                    [](Node& n) {
                      if (n.parent_needs_grad(0))
                        n.Push(0, n.grad.cwiseProduct(n.parent_value(1)));
                      if (n.parent_needs_grad(1))
                        n.Push(1, n.grad.cwiseProduct(n.parent_value(0)));
                    });
}

Var Scale(const Var& a, double s) {
  return MakeResult(a.value() * s, {a.node()},
                    [s](Node& n) { n.Push(0, n.grad * s); });
}

Var AddRow(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("AddRow: row must be 1 x cols");
  Matrix v = a.value().rowwise() + row.value().row(0);
  return MakeResult(std::move(v), {a.node(), row.node()}, [](Node& n) {
    n.Push(0, n.grad);
    if (n.parent_needs_grad(1)) n.Push(1, n.grad.colwise().sum());
  });
}

Var AddConstant(const Var& a, const Matrix& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols())
    throw std::invalid_argument("AddConstant: shape mismatch");
  return MakeResult(a.value() + c, {a.node()}, [](Node& n) { n.Push(0, n.grad); });
}

Var Relu(const Var& a) {
  return MakeResult(a.value().cwiseMax(0.0), {a.node()}, [](Node& n) {
    n.Push(0, (n.parent_value(0).array() > 0.0).cast<double>().matrix().cwiseProduct(n.grad));
  });
}

Var Sigmoid(const Var& a) {
  Matrix v = a.value().unaryExpr([](double x) { return Sigmoid(x); });
  return MakeResult(std::move(v), {a.node()}, [](Node& n) {
    n.Push(0, (n.value.array() * (1.0 - n.value.array()) * n.grad.array()).matrix());
  });
}

Var Tanh(const Var& a) {
  Matrix v = a.value().array().tanh().matrix();
  return MakeResult(std::move(v), {a.node()}, [](Node& n) {
    n.Push(0, ((1.0 - n.value.array().square()) * n.grad.array()).matrix());
  });
}

Var Silu(const Var& a) {
  Matrix s = a.value().unaryExpr([](double x) { return Sigmoid(x); });
  Matrix v = a.value().cwiseProduct(s);
  return MakeResult(std::move(v), {a.node()}, [s = std::move(s)](Node& n) {
    const auto& x = n.parent_value(0).array();
    n.Push(0, ((s.array() * (1.0 + x * (1.0 - s.array()))) * n.grad.array()).matrix());
  });
}

Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d)
    throw std::invalid_argument("LayerNorm: gamma/beta must be 1 x cols");
  const Matrix& in = x.value();
  Eigen::VectorXd mean = in.rowwise().mean();
  Matrix centered = in.colwise() - mean;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / double(d)) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  y.rowwise() += beta.value().row(0);
  return MakeResult(
      std::move(y), {x.node(), gamma.node(), beta.node()},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), d](Node& n) {
        const Matrix& g = n.grad;
        if (n.parent_needs_grad(1))
          n.Push(1, g.cwiseProduct(xhat).colwise().sum());
        if (n.parent_needs_grad(2)) n.Push(2, g.colwise().sum());
        if (n.parent_needs_grad(0)) {
          Matrix dxhat = (g.array().rowwise() * n.parent_value(1).row(0).array()).matrix();
          Eigen::VectorXd sum_d = dxhat.rowwise().sum();
          Eigen::VectorXd sum_dx = dxhat.cwiseProduct(xhat).rowwise().sum();
          Matrix dx = (double(d) * dxhat.array()).matrix();
          dx.colwise() -= sum_d;
          dx -= (xhat.array().colwise() * sum_dx.array()).matrix();
          dx = (dx.array().colwise() * (inv_std.array() / double(d))).matrix();
          n.Push(0, dx);
        }
      });
}

Var SoftmaxRows(const Var& x) {
  Matrix y = x.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return MakeResult(std::move(y), {x.node()}, [](Node& n) {
    Eigen::VectorXd dot = n.grad.cwiseProduct(n.value).rowwise().sum();
    Matrix g = n.grad;
    g.colwise() -= dot;
    n.Push(0, g.cwiseProduct(n.value));
  });
}

Var SliceCols(const Var& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols())
    throw std::invalid_argument("SliceCols: out of range");
  return MakeResult(x.value().middleCols(start, count), {x.node()},
                    [start, count](Node& n) {
                      if (!n.parent_needs_grad(0)) return;
                      n.parents[0]->Grad().middleCols(start, count) += n.grad;
                    });
}

Var SliceRows(const Var& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.rows())
    throw std::invalid_argument("SliceRows: out of range");
  return MakeResult(x.value().middleRows(start, count), {x.node()},
                    [start, count](Node& n) {
                      if (!n.parent_needs_grad(0)) return;
                      n.parents[0]->Grad().middleRows(start, count) += n.grad;
                    });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatCols: no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) throw std::invalid_argument("ConcatCols: rows differ");
    cols += p.cols();
  }
  Matrix v(parts[0].rows(), cols);
  std::vector<NodePtr> parents;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    parents.push_back(p.node());
  }
  return MakeResult(std::move(v), std::move(parents), [](Node& n) {
    Eigen::Index at = 0;
    for (size_t i = 0; i < n.parents.size(); ++i) {
      const Eigen::Index c = n.parents[i]->value.cols();
      if (n.parent_needs_grad(i)) n.parents[i]->Grad() += n.grad.middleCols(at, c);
      at += c;
    }
  });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatRows: no inputs");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols()) throw std::invalid_argument("ConcatRows: cols differ");
    rows += p.rows();
  }
  Matrix v(rows, parts[0].cols());
  std::vector<NodePtr> parents;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    parents.push_back(p.node());
  }
  return MakeResult(std::move(v), std::move(parents), [](Node& n) {
    Eigen::Index at = 0;
    for (size_t i = 0; i < n.parents.size(); ++i) {
      const Eigen::Index r = n.parents[i]->value.rows();
      if (n.parent_needs_grad(i)) n.parents[i]->Grad() += n.grad.middleRows(at, r);
      at += r;
    }
  });
}

Var Conv1d(const Var& x, const Var& weight, const Var& bias, int kernel,
           int dilation) {
  const Eigen::Index frames = x.rows();
  const Eigen::Index in = x.cols();
  if (weight.rows() != kernel * in)
    throw std::invalid_argument("Conv1d: weight rows must be kernel * in_channels");
  if (bias.rows() != 1 || bias.cols() != weight.cols())
    throw std::invalid_argument("Conv1d: bias must be 1 x out_channels");
  const int half = (kernel - 1) / 2;
  Matrix cols = Matrix::Zero(frames, kernel * in);
  for (int k = 0; k < kernel; ++k) {
    const Eigen::Index shift = Eigen::Index(k - half) * dilation;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(frames, frames - shift);
    if (hi > lo) cols.block(lo, k * in, hi - lo, in) = x.value().middleRows(lo + shift, hi - lo);
  }
  Matrix v = cols * weight.value();
  v.rowwise() += bias.value().row(0);
  return MakeResult(
      std::move(v), {x.node(), weight.node(), bias.node()},
      [cols = std::move(cols), kernel, dilation, half, frames, in](Node& n) {
        if (n.parent_needs_grad(1)) n.Push(1, cols.transpose() * n.grad);
        if (n.parent_needs_grad(2)) n.Push(2, n.grad.colwise().sum());
        if (!n.parent_needs_grad(0)) return;
        const Matrix gcols = n.grad * n.parent_value(1).transpose();
        Matrix& gx = n.parents[0]->Grad();
        for (int k = 0; k < kernel; ++k) {
          const Eigen::Index shift = Eigen::Index(k - half) * dilation;
          const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
          const Eigen::Index hi = std::min<Eigen::Index>(frames, frames - shift);
          if (hi > lo) gx.middleRows(lo + shift, hi - lo) += gcols.block(lo, k * in, hi - lo, in);
        }
      });
}

Var DepthwiseConv1d(const Var& x, const Var& weight, const Var& bias,
                    int dilation) {
  const Eigen::Index frames = x.rows();
  const Eigen::Index channels = x.cols();
  const auto kernel = static_cast<int>(weight.rows());
  if (weight.cols() != channels || bias.rows() != 1 || bias.cols() != channels)
    throw std::invalid_argument("DepthwiseConv1d: weight/bias shape mismatch");
  const int half = (kernel - 1) / 2;
  Matrix v(frames, channels);
  v.rowwise() = bias.value().row(0);
  const Matrix& xv = x.value();
  const Matrix& w = weight.value();
  for (int k = 0; k < kernel; ++k) {
    const Eigen::Index shift = Eigen::Index(k - half) * dilation;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min<Eigen::Index>(frames, frames - shift);
    if (hi <= lo) continue;
    v.middleRows(lo, hi - lo) +=
        (xv.middleRows(lo + shift, hi - lo).array().rowwise() * w.row(k).array()).matrix();
  }
  return MakeResult(
      std::move(v), {x.node(), weight.node(), bias.node()},
      [kernel, dilation, half, frames](Node& n) {
        const Matrix& xv = n.parent_value(0);
        const Matrix& w = n.parent_value(1);
        Matrix gw = Matrix::Zero(w.rows(), w.cols());
        Matrix gx = Matrix::Zero(xv.rows(), xv.cols());
        for (int k = 0; k < kernel; ++k) {
          const Eigen::Index shift = Eigen::Index(k - half) * dilation;
          const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
          const Eigen::Index hi = std::min<Eigen::Index>(frames, frames - shift);
          if (hi <= lo) continue;
          const auto g = n.grad.middleRows(lo, hi - lo);
          gw.row(k) += g.cwiseProduct(xv.middleRows(lo + shift, hi - lo)).colwise().sum();
          gx.middleRows(lo + shift, hi - lo) +=
              (g.array().rowwise() * w.row(k).array()).matrix();
        }
        n.Push(0, gx);
        n.Push(1, gw);
        if (n.parent_needs_grad(2)) n.Push(2, n.grad.colwise().sum());
      });
}

Var RelShift(const Var& x) {
  const Eigen::Index t = x.rows();
  if (x.cols() != 2 * t - 1) throw std::invalid_argument("RelShift: need T x (2T-1)");
  Matrix v(t, t);
  for (Eigen::Index i = 0; i < t; ++i) v.row(i) = x.value().row(i).segment(t - 1 - i, t);
  return MakeResult(std::move(v), {x.node()}, [t](Node& n) {
    Matrix& gx = n.parents[0]->Grad();
    for (Eigen::Index i = 0; i < t; ++i) gx.row(i).segment(t - 1 - i, t) += n.grad.row(i);
  });
}

Var Dropout(const Var& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("Dropout: p must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  Matrix v = x.value().cwiseProduct(mask);
  return MakeResult(std::move(v), {x.node()}, [mask = std::move(mask)](Node& n) {
    n.Push(0, n.grad.cwiseProduct(mask));
  });
}

Var WeightedNllSum(const Var& logits, std::span<const uint8_t> targets,
                   std::span<const double> class_weights, int valid_frames) {
  const Eigen::Index classes = logits.cols();
  if (static_cast<Eigen::Index>(class_weights.size()) != classes)
    throw std::invalid_argument("WeightedNllSum: one weight per class required");
  if (valid_frames < 0 || valid_frames > logits.rows() ||
      static_cast<int>(targets.size()) < valid_frames)
    throw std::invalid_argument("WeightedNllSum: bad valid frame count");
  const Matrix& x = logits.value();
  Matrix probs = Matrix::Zero(x.rows(), classes);
  double total = 0.0;
  for (int t = 0; t < valid_frames; ++t) {
    const int y = targets[size_t(t)];
    if (y >= classes) throw std::invalid_argument("WeightedNllSum: target out of range");
    const double m = x.row(t).maxCoeff();
    const double lse = m + std::log((x.row(t).array() - m).exp().sum());
    total += class_weights[size_t(y)] * (lse - x(t, y));
    probs.row(t) = (x.row(t).array() - lse).exp().matrix();
  }
  Matrix v(1, 1);
  v(0, 0) = total;
  std::vector<uint8_t> y(targets.begin(), targets.begin() + valid_frames);
  std::vector<double> w(class_weights.begin(), class_weights.end());
  return MakeResult(std::move(v), {logits.node()},
                    [probs = std::move(probs), y = std::move(y), w = std::move(w)](Node& n) {
                      Matrix g = probs;
                      for (size_t t = 0; t < y.size(); ++t) {
                        g(Eigen::Index(t), y[t]) -= 1.0;
                        g.row(Eigen::Index(t)) *= w[y[t]];
                      }
                      n.Push(0, g * n.grad(0, 0));
                    });
}

}  // namespace osd::nn
