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

#include "osd/model_zoo.h"

#include <cmath>
#include <set>

#include "osd/digest.h"
#include "osd/error.h"

namespace osd::models {

using nn::ForwardContext;
using nn::Matrix;
using nn::ParameterStore;
using nn::Var;

std::string FamilyName(Family family) {
  switch (family) {
    case Family::kTF:
      return "TF";
    case Family::kTCN:
      return "TCN";
    case Family::kCF:
      return "CF";
    case Family::kROSD:
      return "ROSD";
  }
  return "?";
}

Family ParseFamily(std::string_view name) {
  if (name == "TF") return Family::kTF;
  if (name == "TCN") return Family::kTCN;
  if (name == "CF") return Family::kCF;
  if (name == "ROSD") return Family::kROSD;
  throw ConfigError("unknown model family '" + std::string(name) +
                    "' (expected TF, TCN, CF or ROSD)");
}

ModelConfig ModelConfig::Default(Family family) {
  ModelConfig c;
  c.family = family;
  switch (family) {
    case Family::kTF:
      c.model_dim = 168;
      c.block_count = 12;
      c.head_count = 8;
      c.ff_dim = 640;
      break;
    case Family::kCF:
      c.model_dim = 168;
      c.block_count = 6;
      c.head_count = 8;
      c.ff_dim = 640;
      c.conv_kernel = 15;
      break;
    case Family::kTCN:
      c.model_dim = 200;
      c.block_count = 3;
      c.tcn_resblocks_per_block = 8;
      c.tcn_kernel = 3;
      c.head_count = 1;
      break;
    case Family::kROSD:
      c.model_dim = 256;
      c.block_count = 3;
      c.hidden_dim = 256;
      c.head_count = 1;
      break;
  }
  return c;
}

void ModelConfig::Validate() const {
  auto fail = [](const std::string& why) { throw ConfigError("model: " + why); };
  if (class_count != 3) fail("class_count must be 3");
  if (input_dim != 64) fail("input_dim must be 64");
  if (model_dim <= 0) fail("model_dim must be positive");
  if (block_count <= 0) fail("block_count must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  const bool attention = family == Family::kTF || family == Family::kCF;
  if (attention && (head_count <= 0 || model_dim % head_count != 0))
    fail("model_dim " + std::to_string(model_dim) + " not divisible by " +
         std::to_string(head_count) + " heads");
  if (attention && ff_dim <= 0) fail("ff_dim must be positive");
  if (family == Family::kCF && (conv_kernel <= 0 || conv_kernel % 2 == 0))
    fail("conv_kernel must be odd and positive");
  if (family == Family::kTCN) {
    if (tcn_resblocks_per_block <= 0) fail("tcn_resblocks must be positive");
    if (tcn_kernel <= 0 || tcn_kernel % 2 == 0) fail("tcn_kernel must be odd");
  }
  if (family == Family::kROSD && hidden_dim <= 0) fail("hidden_dim must be positive");
  if (!strict) return;
  switch (family) {
    case Family::kTF:
      if (block_count != 12 || head_count != 8)
        fail("TF requires 12 blocks with 8 heads (set model.strict=false to relax)");
      break;
    case Family::kCF:
      if (block_count != 6) fail("CF requires 6 blocks (set model.strict=false to relax)");
      break;
    case Family::kTCN:
      if (block_count != 3 || tcn_resblocks_per_block != 8)
        fail("TCN requires 3 blocks of 8 res-blocks (set model.strict=false to relax)");
      break;
    case Family::kROSD:
      break;
  }
}

KeyValueConfig ModelConfig::ToKeyValues() const {
  KeyValueConfig kv;
  kv.Set("model.family", FamilyName(family));
  kv.Set("model.input_dim", std::to_string(input_dim));
  kv.Set("model.dim", std::to_string(model_dim));
  kv.Set("model.blocks", std::to_string(block_count));
  kv.Set("model.heads", std::to_string(head_count));
  kv.Set("model.ff_dim", std::to_string(ff_dim));
  kv.Set("model.tcn_resblocks", std::to_string(tcn_resblocks_per_block));
  kv.Set("model.tcn_kernel", std::to_string(tcn_kernel));
  kv.Set("model.conv_kernel", std::to_string(conv_kernel));
  kv.Set("model.hidden_dim", std::to_string(hidden_dim));
  kv.Set("model.dropout", FormatDouble(dropout));
  kv.Set("model.classes", std::to_string(class_count));
  kv.Set("model.seed", std::to_string(seed));
  kv.Set("model.strict", strict ? "true" : "false");
  return kv;
}

ModelConfig ModelConfig::FromKeyValues(const KeyValueConfig& kv) {
  ModelConfig c = Default(ParseFamily(kv.GetOr("model.family", "CF")));
  auto integer = [&](const char* key, int& dst) {
    if (auto v = kv.Get(key)) dst = static_cast<int>(ParseInt(*v, key));
  };
  integer("model.input_dim", c.input_dim);
  integer("model.dim", c.model_dim);
  integer("model.blocks", c.block_count);
  integer("model.heads", c.head_count);
  integer("model.ff_dim", c.ff_dim);
  integer("model.tcn_resblocks", c.tcn_resblocks_per_block);
  integer("model.tcn_kernel", c.tcn_kernel);
  integer("model.conv_kernel", c.conv_kernel);
  integer("model.hidden_dim", c.hidden_dim);
  integer("model.classes", c.class_count);
  if (auto v = kv.Get("model.dropout")) c.dropout = ParseDouble(*v, "model.dropout");
  if (auto v = kv.Get("model.seed"))
    c.seed = static_cast<uint64_t>(ParseInt(*v, "model.seed"));
  if (auto v = kv.Get("model.strict")) c.strict = ParseBool(*v, "model.strict");
  c.Validate();
  return c;
}

std::string ModelConfig::ArchitectureDigest() const {
  KeyValueConfig kv = ToKeyValues();
  KeyValueConfig arch;
  for (const auto& [k, v] : kv.entries())
    if (k != "model.seed" && k != "model.dropout" && k != "model.strict")
      arch.Set(k, v);
  return ShortDigest(arch.ToString());
}

struct OsdModel::Encoder {
  virtual ~Encoder() = default;
  virtual Var operator()(const Var& x, const ForwardContext& ctx) const = 0;
};

namespace {

class TransformerEncoder final : public OsdModel::Encoder {
 public:
  TransformerEncoder(ParameterStore& ps, const ModelConfig& c) {
    for (int b = 0; b < c.block_count; ++b) {
      const std::string n = "encoder.block" + std::to_string(b);
      Block blk;
      blk.attn_norm = nn::Norm::Make(ps, n + ".attn_norm", c.model_dim);
      blk.attn = nn::SelfAttention::Make(ps, n + ".attn", c.model_dim, c.head_count, false);
      blk.ff_norm = nn::Norm::Make(ps, n + ".ff_norm", c.model_dim);
      blk.ff = nn::FeedForward::Make(ps, n + ".ff", c.model_dim, c.ff_dim,
                                     nn::FeedForward::Activation::kRelu);
      blocks_.push_back(blk);
    }
    final_norm_ = nn::Norm::Make(ps, "encoder.final_norm", c.model_dim);
  }

  Var operator()(const Var& in, const ForwardContext& ctx) const override {
    Var x = AddConstant(in, nn::SinusoidalPositions(static_cast<int>(in.rows()),
                                                    static_cast<int>(in.cols())));
    x = ctx.Drop(x);
    for (const auto& b : blocks_) {
      x = Add(x, ctx.Drop(b.attn(b.attn_norm(x), ctx)));
      x = Add(x, ctx.Drop(b.ff(b.ff_norm(x), ctx)));
    }
    return final_norm_(x);
  }

 private:
  struct Block {
    nn::Norm attn_norm;
    nn::SelfAttention attn;
    nn::Norm ff_norm;
    nn::FeedForward ff;
  };
  std::vector<Block> blocks_;
  nn::Norm final_norm_;
};

// Macaron block: x + FF/2, + relative-position self-attention, + convolution
// module, + FF/2, then layer norm. The convolution module is
// norm -> pointwise (d -> 2d) -> GLU -> depthwise conv -> norm -> swish ->
// pointwise (d -> d).
class ConformerEncoder final : public OsdModel::Encoder {
 public:
  ConformerEncoder(ParameterStore& ps, const ModelConfig& c) {
    const int d = c.model_dim;
    for (int b = 0; b < c.block_count; ++b) {
      const std::string n = "encoder.block" + std::to_string(b);
      Block blk;
      blk.ff1_norm = nn::Norm::Make(ps, n + ".ff1_norm", d);
      blk.ff1 = nn::FeedForward::Make(ps, n + ".ff1", d, c.ff_dim,
                                      nn::FeedForward::Activation::kSwish);
      blk.attn_norm = nn::Norm::Make(ps, n + ".attn_norm", d);
      blk.attn = nn::SelfAttention::Make(ps, n + ".attn", d, c.head_count, true);
      blk.conv_norm = nn::Norm::Make(ps, n + ".conv_norm", d);
      blk.conv_in = nn::Linear::Make(ps, n + ".conv_in", d, 2 * d);
      blk.depthwise = nn::DepthwiseConv::Make(ps, n + ".depthwise", d, c.conv_kernel);
      blk.depthwise_norm = nn::Norm::Make(ps, n + ".depthwise_norm", d);
      blk.conv_out = nn::Linear::Make(ps, n + ".conv_out", d, d);
      blk.ff2_norm = nn::Norm::Make(ps, n + ".ff2_norm", d);
      blk.ff2 = nn::FeedForward::Make(ps, n + ".ff2", d, c.ff_dim,
                                      nn::FeedForward::Activation::kSwish);
      blk.out_norm = nn::Norm::Make(ps, n + ".out_norm", d);
      blocks_.push_back(blk);
    }
    dim_ = d;
  }

  Var operator()(const Var& in, const ForwardContext& ctx) const override {
    Var x = in;
    for (const auto& b : blocks_) {
      x = Add(x, Scale(ctx.Drop(b.ff1(b.ff1_norm(x), ctx)), 0.5));
      x = Add(x, ctx.Drop(b.attn(b.attn_norm(x), ctx)));
      Var h = b.conv_in(b.conv_norm(x));
      h = Mul(SliceCols(h, 0, dim_), Sigmoid(SliceCols(h, dim_, dim_)));
      h = Silu(b.depthwise_norm(b.depthwise(h)));
      x = Add(x, ctx.Drop(b.conv_out(h)));
      x = Add(x, Scale(ctx.Drop(b.ff2(b.ff2_norm(x), ctx)), 0.5));
      x = b.out_norm(x);
    }
    return x;
  }

 private:
  struct Block {
    nn::Norm ff1_norm;
    nn::FeedForward ff1;
    nn::Norm attn_norm;
    nn::SelfAttention attn;
    nn::Norm conv_norm;
    nn::Linear conv_in;
    nn::DepthwiseConv depthwise;
    nn::Norm depthwise_norm;
    nn::Linear conv_out;
    nn::Norm ff2_norm;
    nn::FeedForward ff2;
    nn::Norm out_norm;
  };
  std::vector<Block> blocks_;
  int dim_ = 0;
};

// Res-block: x + dropout(pointwise(norm(relu(dilated_conv(x))))), dilation
// doubling 1, 2, 4, ... inside each block.
class TcnEncoder final : public OsdModel::Encoder {
 public:
  TcnEncoder(ParameterStore& ps, const ModelConfig& c) {
    const int d = c.model_dim;
    for (int b = 0; b < c.block_count; ++b) {
      for (int r = 0; r < c.tcn_resblocks_per_block; ++r) {
        const std::string n =
            "encoder.block" + std::to_string(b) + ".res" + std::to_string(r);
        ResBlock rb;
        rb.conv = nn::Conv::Make(ps, n + ".conv", d, d, c.tcn_kernel, 1 << r);
        rb.norm = nn::Norm::Make(ps, n + ".norm", d);
        rb.pointwise = nn::Linear::Make(ps, n + ".pointwise", d, d);
        res_.push_back(rb);
      }
    }
  }

  Var operator()(const Var& in, const ForwardContext& ctx) const override {
    Var x = in;
    for (const auto& rb : res_) {
      Var h = rb.pointwise(rb.norm(Relu(rb.conv(x))));
      x = Add(x, ctx.Drop(h));
    }
    return x;
  }

 private:
  struct ResBlock {
    nn::Conv conv;
    nn::Norm norm;
    nn::Linear pointwise;
  };
  std::vector<ResBlock> res_;
};

// Stacked bidirectional LSTM over the valid frames; padded frames get zeros.
class BiLstmEncoder final : public OsdModel::Encoder {
 public:
  BiLstmEncoder(ParameterStore& ps, const ModelConfig& c) : hidden_(c.hidden_dim) {
    int in = c.model_dim;
    for (int l = 0; l < c.block_count; ++l) {
      const std::string n = "encoder.layer" + std::to_string(l);
      Layer layer;
      layer.forward = nn::LstmDirection::Make(ps, n + ".forward", in, c.hidden_dim);
      layer.backward = nn::LstmDirection::Make(ps, n + ".backward", in, c.hidden_dim);
      layers_.push_back(layer);
      in = 2 * c.hidden_dim;
    }
  }

  Var operator()(const Var& in, const ForwardContext& ctx) const override {
    const auto frames = static_cast<int>(in.rows());
    const int valid =
        ctx.valid_frames > 0 ? std::min(ctx.valid_frames, frames) : frames;
    Var x = valid < frames ? SliceRows(in, 0, valid) : in;
    for (size_t l = 0; l < layers_.size(); ++l) {
      if (l > 0) x = ctx.Drop(x);
      const Var both[] = {layers_[l].forward(x, false), layers_[l].backward(x, true)};
      x = nn::ConcatCols(both);
    }
    if (valid < frames) {
      const Var parts[] = {x, nn::Constant(Matrix::Zero(frames - valid, 2 * hidden_))};
      x = nn::ConcatRows(parts);
    }
    return x;
  }

 private:
  struct Layer {
    nn::LstmDirection forward;
    nn::LstmDirection backward;
  };
  std::vector<Layer> layers_;
  int hidden_;
};

}  // namespace

OsdModel::OsdModel(const ModelConfig& config)
    : config_(config), params_(config.seed) {
  config_.Validate();
  const int d = config_.model_dim;
  pre_net_ = nn::Linear::Make(params_, "pre_net", config_.input_dim, d);
  int encoder_out = d;
  switch (config_.family) {
    case Family::kTF:
      encoder_ = std::make_unique<TransformerEncoder>(params_, config_);
      break;
    case Family::kCF:
      encoder_ = std::make_unique<ConformerEncoder>(params_, config_);
      break;
    case Family::kTCN:
      encoder_ = std::make_unique<TcnEncoder>(params_, config_);
      break;
    case Family::kROSD:
      encoder_ = std::make_unique<BiLstmEncoder>(params_, config_);
      encoder_out = 2 * config_.hidden_dim;
      break;
  }
  post_net_ = nn::Linear::Make(params_, "post_net", encoder_out, config_.class_count);
}

OsdModel::~OsdModel() = default;

Var OsdModel::EncodeFrames(const Eigen::MatrixXd& features,
                           const ForwardContext& ctx) const {
  if (features.cols() != config_.input_dim || features.rows() == 0)
    throw DataError("model input must be frames x " +
                    std::to_string(config_.input_dim) + ", got " +
                    std::to_string(features.rows()) + "x" +
                    std::to_string(features.cols()));
  if (ctx.valid_frames < 0 || ctx.valid_frames > features.rows())
    throw DataError("valid frame count out of range");
  return (*encoder_)(pre_net_(nn::Constant(features)), ctx);
}

Var OsdModel::Forward(const Eigen::MatrixXd& features,
                      const ForwardContext& ctx) const {
  return post_net_(EncodeFrames(features, ctx));
}

void OsdModel::CheckInput(const audio::FeatureMatrix& features) const {
  if (features.mel_bins() != config_.input_dim)
    throw DataError("feature matrix has " + std::to_string(features.mel_bins()) +
                    " bins, model expects " + std::to_string(config_.input_dim));
}

PredictionMatrix OsdModel::Predict(const audio::FeatureMatrix& features) const {
  CheckInput(features);
  nn::NoGradGuard no_grad;
  ForwardContext ctx;
  ctx.valid_frames = features.valid_frames;
  Var logits = Forward(features.values.transpose(), ctx);
  PredictionMatrix out;
  out.logits = logits.value().transpose();
  out.valid_frames = features.valid_frames;
  out.segment_id = features.segment_id;
  return out;
}

Eigen::MatrixXd OsdModel::Embed(const audio::FeatureMatrix& features) const {
  CheckInput(features);
  nn::NoGradGuard no_grad;
  ForwardContext ctx;
  ctx.valid_frames = features.valid_frames;
  return EncodeFrames(features.values.transpose(), ctx).value().transpose();
}

std::unique_ptr<OsdModel> BuildModel(const ModelConfig& config) {
  return std::make_unique<OsdModel>(config);
}

}  // namespace osd::models
