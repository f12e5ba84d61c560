// Copyright 2026 The Vitiseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vitiseg/unet.hpp"

#include <cmath>

#include "vitiseg/errors.hpp"

namespace vitiseg {

std::string to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::kPlain: return "plain";
    case EncoderVariant::kVggMini: return "vgg_mini";
    case EncoderVariant::kResnetMini: return "resnet_mini";
    case EncoderVariant::kInceptionMini: return "inception_mini";
    case EncoderVariant::kInceptionResnetMini: return "inception_resnet_mini";
    case EncoderVariant::kSeMini: return "se_mini";
  }
  throw UsageError("to_string: bad EncoderVariant");
}

EncoderVariant variant_from_string(const std::string& name) {
  if (name == "plain") return EncoderVariant::kPlain;
  if (name == "vgg_mini") return EncoderVariant::kVggMini;
  if (name == "resnet_mini") return EncoderVariant::kResnetMini;
  if (name == "inception_mini") return EncoderVariant::kInceptionMini;
  if (name == "inception_resnet_mini") return EncoderVariant::kInceptionResnetMini;
  if (name == "se_mini") return EncoderVariant::kSeMini;
  throw ConfigError("unknown encoder variant '" + name +
                    "' (expected plain, vgg_mini, resnet_mini, inception_mini, "
                    "inception_resnet_mini, or se_mini)");
}

int UNetConfig::scaled(int channels) const {
  return static_cast<int>(std::llround(channels * width_factor));
}

void UNetConfig::validate() const {
  if (input_size < 16 || input_size % 16 != 0) {
    throw ConfigError("unet: input_size " + std::to_string(input_size) +
                      " must be a positive multiple of 16");
  }
  if (decoder_channels.size() != 5) {
    throw ConfigError("unet: decoder_channels needs exactly 5 entries");
  }
  for (std::size_t i = 1; i < decoder_channels.size(); ++i) {
    if (decoder_channels[i] >= decoder_channels[i - 1]) {
      throw ConfigError("unet: decoder_channels must be strictly decreasing");
    }
  }
  if (width_factor <= 0.0) throw ConfigError("unet: width_factor must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("unet: dropout_rate out of [0, 1)");
  }
  if (se_reduction < 1) throw ConfigError("unet: se_reduction must be >= 1");

  std::vector<int> widths;
  for (int i = 4; i >= 1; --i) widths.push_back(scaled(decoder_channels[static_cast<std::size_t>(i)]));
  widths.push_back(scaled(bottleneck_units));
  for (int w : widths) {
    if (w < 1) throw ConfigError("unet: width_factor collapses a stage to zero channels");
  }
  const bool inception = variant == EncoderVariant::kInceptionMini ||
                         variant == EncoderVariant::kInceptionResnetMini;
  if (inception) {
    for (int w : widths) {
      if (w % 4 != 0) {
        throw ConfigError("unet: inception stage width " + std::to_string(w) +
                          " not divisible by 4 branches");
      }
    }
    if (input_size < 32) {
      throw ConfigError("unet: inception pool branch needs input_size >= 32");
    }
  }
  if (variant == EncoderVariant::kSeMini) {
    for (int w : widths) {
      if (w < se_reduction) {
        throw ConfigError("unet: SE stage width " + std::to_string(w) +
                          " below reduction " + std::to_string(se_reduction));
      }
    }
  }
}

void ConvUnit::init(const std::string& unit_name, int c_in, int c_out, int k, bool bn,
                    bool act, int pad, Rng& rng) {
  name = unit_name;
  padding = pad;
  use_bn = bn;
  use_act = act;
  Tensor w({c_out, c_in, k, k});
  const Real limit = std::sqrt(6.0 / (static_cast<Real>(c_in) * k * k));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", Tensor::zeros({c_out}));
  if (use_bn) {
    gamma = Parameter(name + ".gamma", Tensor::full({c_out}, 1.0));
    beta = Parameter(name + ".beta", Tensor::zeros({c_out}));
    stats = BatchNormStats(c_out);
  }
}

Var ConvUnit::apply(Tape& tape, Var x, Mode mode) {
  Var y = tape.conv2d(x, tape.param(weight), tape.param(bias), 1, padding);
  if (use_bn) y = tape.batch_norm(y, tape.param(gamma), tape.param(beta), stats, mode);
  if (use_act) y = tape.elu(y);
  return y;
}

void ConvUnit::collect(std::vector<Parameter*>& params,
                       std::vector<std::pair<std::string, BatchNormStats*>>& stats_out) {
  params.push_back(&weight);
  params.push_back(&bias);
  if (use_bn) {
    params.push_back(&gamma);
    params.push_back(&beta);
    stats_out.emplace_back(name, &stats);
  }
}

void Stage::init(const std::string& stage_name, Kind k, int c_in, int c_out, int vgg_convs,
                 bool bn, int se_reduction, Rng& rng) {
  kind = k;
  switch (kind) {
    case Kind::kDouble:
    case Kind::kSe:
      convs.resize(2);
      convs[0].init(stage_name + ".conv1", c_in, c_out, 3, bn, true, 1, rng);
      convs[1].init(stage_name + ".conv2", c_out, c_out, 3, bn, true, 1, rng);
      break;
    case Kind::kVgg:
      convs.resize(static_cast<std::size_t>(vgg_convs));
      for (int i = 0; i < vgg_convs; ++i) {
        convs[static_cast<std::size_t>(i)].init(
            stage_name + ".conv" + std::to_string(i + 1), i == 0 ? c_in : c_out, c_out, 3,
            bn, true, 1, rng);
      }
      break;
    case Kind::kResidual:
      convs.resize(2);
      convs[0].init(stage_name + ".conv1", c_in, c_out, 3, bn, true, 1, rng);
      convs[1].init(stage_name + ".conv2", c_out, c_out, 3, bn, false, 1, rng);
      break;
    case Kind::kInception:
    case Kind::kInceptionRes: {
      if (c_out % 4 != 0) {
        throw ConfigError(stage_name + ": inception width " + std::to_string(c_out) +
                          " not divisible by 4");
      }
      const int q = c_out / 4;
      convs.resize(5);
      convs[0].init(stage_name + ".b1.conv", c_in, q, 1, bn, true, 0, rng);
      convs[1].init(stage_name + ".b2.conv", c_in, q, 3, bn, true, 1, rng);
      convs[2].init(stage_name + ".b3.conv1", c_in, q, 3, bn, true, 1, rng);
      convs[3].init(stage_name + ".b3.conv2", q, q, 3, bn, true, 1, rng);
      convs[4].init(stage_name + ".b4.conv", c_in, q, 1, bn, true, 0, rng);
      break;
    }
  }
  if ((kind == Kind::kResidual || kind == Kind::kInceptionRes) && c_in != c_out) {
    has_projection = true;
    projection.init(stage_name + ".proj", c_in, c_out, 1, false, false, 0, rng);
  }
  if (kind == Kind::kSe) {
    const int squeezed = c_out / se_reduction;
    se_squeeze.init(stage_name + ".se.squeeze", c_out, squeezed, 1, false, true, 0, rng);
    se_excite.init(stage_name + ".se.excite", squeezed, c_out, 1, false, false, 0, rng);
  }
}

Var Stage::apply(Tape& tape, Var x, Mode mode) {
  switch (kind) {
    case Kind::kDouble:
    case Kind::kVgg: {
      Var y = x;
      for (ConvUnit& c : convs) y = c.apply(tape, y, mode);
      return y;
    }
    case Kind::kResidual: {
      Var branch = convs[1].apply(tape, convs[0].apply(tape, x, mode), mode);
      Var shortcut = has_projection ? projection.apply(tape, x, mode) : x;
      return tape.add(shortcut, branch);
    }
    case Kind::kInception:
    case Kind::kInceptionRes: {
      Var b1 = convs[0].apply(tape, x, mode);
      Var b2 = convs[1].apply(tape, x, mode);
      Var b3 = convs[3].apply(tape, convs[2].apply(tape, x, mode), mode);
      Var b4 = tape.upsample_nearest2(tape.maxpool2(convs[4].apply(tape, x, mode)));
      Var y = tape.concat_channels(tape.concat_channels(b1, b2),
                                   tape.concat_channels(b3, b4));
      if (kind == Kind::kInception) return y;
      Var shortcut = has_projection ? projection.apply(tape, x, mode) : x;
      return tape.add(shortcut, y);
    }
    case Kind::kSe: {
      Var y = convs[1].apply(tape, convs[0].apply(tape, x, mode), mode);
      Var gate = tape.global_avg_pool(y);
      gate = se_squeeze.apply(tape, gate, mode);
      gate = tape.sigmoid(se_excite.apply(tape, gate, mode));
      return tape.scale_channels(y, gate);
    }
  }
  throw UsageError("Stage::apply: bad kind");
}

void Stage::collect(std::vector<Parameter*>& params,
                    std::vector<std::pair<std::string, BatchNormStats*>>& stats_out) {
  for (ConvUnit& c : convs) c.collect(params, stats_out);
  if (has_projection) projection.collect(params, stats_out);
  if (kind == Kind::kSe) {
    se_squeeze.collect(params, stats_out);
    se_excite.collect(params, stats_out);
  }
}

namespace {

Stage::Kind stage_kind(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::kPlain: return Stage::Kind::kDouble;
    case EncoderVariant::kVggMini: return Stage::Kind::kVgg;
    case EncoderVariant::kResnetMini: return Stage::Kind::kResidual;
    case EncoderVariant::kInceptionMini: return Stage::Kind::kInception;
    case EncoderVariant::kInceptionResnetMini: return Stage::Kind::kInceptionRes;
    case EncoderVariant::kSeMini: return Stage::Kind::kSe;
  }
  throw UsageError("stage_kind: bad EncoderVariant");
}

}  // namespace

UNetModel::UNetModel(const UNetConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const auto& dc = config_.decoder_channels;
  const int e1 = config_.scaled(dc[4]), e2 = config_.scaled(dc[3]);
  const int e3 = config_.scaled(dc[2]), e4 = config_.scaled(dc[1]);
  const int bw = config_.scaled(config_.bottleneck_units);
  const Stage::Kind kind = stage_kind(config_.variant);
  const bool bn = config_.use_batch_norm;
  const int r = config_.se_reduction;

  // VGG16's block depths 2,2,3,3,3 mapped onto the 4 stages + bottleneck.
  encoder_[0].init("enc1", kind, 3, e1, 2, bn, r, rng);
  encoder_[1].init("enc2", kind, e1, e2, 2, bn, r, rng);
  encoder_[2].init("enc3", kind, e2, e3, 3, bn, r, rng);
  encoder_[3].init("enc4", kind, e3, e4, 3, bn, r, rng);
  bottleneck_.init("bottleneck", kind, e4, bw, 3, bn, r, rng);

  const int d4 = config_.scaled(dc[1]), d3 = config_.scaled(dc[2]);
  const int d2 = config_.scaled(dc[3]), d1 = config_.scaled(dc[4]);
  decoder_[0].init("dec4", Stage::Kind::kDouble, bw + e4, d4, 2, bn, r, rng);
  decoder_[1].init("dec3", Stage::Kind::kDouble, d4 + e3, d3, 2, bn, r, rng);
  decoder_[2].init("dec2", Stage::Kind::kDouble, d3 + e2, d2, 2, bn, r, rng);
  decoder_[3].init("dec1", Stage::Kind::kDouble, d2 + e1, d1, 2, bn, r, rng);
  head_.init("head", d1, 2, 1, false, false, 0, rng);
}

Var UNetModel::forward(Tape& tape, Var x, Mode mode, Rng* rng) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 4 || xv.dim(1) != 3 || xv.dim(2) != config_.input_size ||
      xv.dim(3) != config_.input_size) {
    throw UsageError("unet forward: expected Nx3x" + std::to_string(config_.input_size) +
                     "x" + std::to_string(config_.input_size) + ", got " + xv.shape_str());
  }
  if (mode == Mode::kTrain && config_.dropout_rate > 0.0 && rng == nullptr) {
    throw UsageError("unet forward: train-mode dropout needs an rng");
  }
  Rng scratch(0);
  Rng& drop_rng = rng ? *rng : scratch;

  last_skip_shapes_.clear();
  Var skips[4];
  Var cur = x;
  for (int i = 0; i < 4; ++i) {
    skips[i] = encoder_[i].apply(tape, cur, mode);
    last_skip_shapes_.push_back(skips[i].shape());
    cur = tape.maxpool2(skips[i]);
  }
  cur = bottleneck_.apply(tape, cur, mode);
  cur = tape.dropout(cur, config_.dropout_rate, drop_rng, mode);
  for (int i = 0; i < 4; ++i) {
    cur = tape.concat_channels(tape.upsample_nearest2(cur), skips[3 - i]);
    cur = decoder_[i].apply(tape, cur, mode);
  }
  return tape.softmax_channels(head_.apply(tape, cur, mode));
}

Tensor UNetModel::forward_eval(const Tensor& batch) {
  Tape tape;
  Var out = forward(tape, tape.input(batch), Mode::kEval);
  return out.value();
}

std::vector<Parameter*> UNetModel::parameters() {
  std::vector<Parameter*> params;
  std::vector<std::pair<std::string, BatchNormStats*>> stats;
  for (Stage& s : encoder_) s.collect(params, stats);
  bottleneck_.collect(params, stats);
  for (Stage& s : decoder_) s.collect(params, stats);
  head_.collect(params, stats);
  return params;
}

std::vector<std::pair<std::string, BatchNormStats*>> UNetModel::batch_norm_stats() {
  std::vector<Parameter*> params;
  std::vector<std::pair<std::string, BatchNormStats*>> stats;
  for (Stage& s : encoder_) s.collect(params, stats);
  bottleneck_.collect(params, stats);
  for (Stage& s : decoder_) s.collect(params, stats);
  head_.collect(params, stats);
  return stats;
}

std::size_t UNetModel::parameter_count() {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

UNetModel build_unet(const UNetConfig& config, Rng& rng) { return UNetModel(config, rng); }

}  // namespace vitiseg
