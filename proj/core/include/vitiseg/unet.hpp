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

#ifndef VITISEG_UNET_HPP_
#define VITISEG_UNET_HPP_

#include <string>
#include <utility>
#include <vector>

#include "vitiseg/rng.hpp"
#include "vitiseg/tape.hpp"
#include "vitiseg/tensor.hpp"

namespace vitiseg {

/// Contracting-path families. Each is a 4-stage miniature keeping the
/// family's signature mechanism; the decoder is shared.
enum class EncoderVariant {
  kPlain,
  kVggMini,
  kResnetMini,
  kInceptionMini,
  kInceptionResnetMini,
  kSeMini,
};

std::string to_string(EncoderVariant v);
EncoderVariant variant_from_string(const std::string& name);

struct UNetConfig {
  int input_size = 64;
  /// Widths before scaling; entry 0 documents the bottleneck, entries 1..4
  /// the decoder stages from deep to shallow (encoder stages mirror them).
  std::vector<int> decoder_channels = {512, 256, 128, 64, 32};
  int bottleneck_units = 512;
  Real width_factor = 0.125;
  EncoderVariant variant = EncoderVariant::kInceptionResnetMini;
  Real dropout_rate = 0.0;
  bool use_batch_norm = true;
  int se_reduction = 4;

  void validate() const;
  /// Channel width after the width factor, rounded to nearest.
  int scaled(int channels) const;

  bool operator==(const UNetConfig&) const = default;
};

/// One conv with its optional batch norm and ELU. The building block every
/// stage is wired from.
struct ConvUnit {
  std::string name;
  Parameter weight;
  Parameter bias;
  Parameter gamma;
  Parameter beta;
  BatchNormStats stats;
  int padding = 0;
  bool use_bn = false;
  bool use_act = true;

  void init(const std::string& unit_name, int c_in, int c_out, int k, bool bn, bool act,
            int pad, Rng& rng);
  Var apply(Tape& tape, Var x, Mode mode);
  void collect(std::vector<Parameter*>& params,
               std::vector<std::pair<std::string, BatchNormStats*>>& stats_out);
};

/// One encoder/bottleneck/decoder stage. Interpretation of `convs` depends
/// on the kind:
///   kDouble    two 3x3 conv-BN-ELU (PLAIN, SE body, decoder stages)
///   kVgg       `convs.size()` chained 3x3 conv-BN-ELU
///   kResidual  conv-BN-ELU, conv-BN, + shortcut (no post-add activation)
///   kInception branches 1x1 | 3x3 | 3x3+3x3 | 1x1+pool, concatenated;
///              kInceptionRes adds the residual shortcut around it
///   kSe        kDouble followed by the squeeze-excitation gate
struct Stage {
  enum class Kind { kDouble, kVgg, kResidual, kInception, kInceptionRes, kSe };

  Kind kind = Kind::kDouble;
  std::vector<ConvUnit> convs;
  ConvUnit projection;  // 1x1 shortcut when residual channels change
  bool has_projection = false;
  ConvUnit se_squeeze;
  ConvUnit se_excite;

  void init(const std::string& stage_name, Kind k, int c_in, int c_out, int vgg_convs,
            bool bn, int se_reduction, Rng& rng);
  Var apply(Tape& tape, Var x, Mode mode);
  void collect(std::vector<Parameter*>& params,
               std::vector<std::pair<std::string, BatchNormStats*>>& stats_out);
};

/// Miniature U-Net: 4 encoder stages (skips at scales 1, 1/2, 1/4, 1/8), a
/// bottleneck at 1/16 with dropout, 4 decoder stages of
/// upsample+concat+double-conv, and a 1x1 conv + softmax head. Channel 1 of
/// the output is the vitiligo-positive probability.
class UNetModel {
 public:
  UNetModel() = default;
  UNetModel(const UNetConfig& config, Rng& rng);

  /// Tape-attached forward for training; caller owns the tape and loss.
  /// Train mode with dropout_rate > 0 needs the rng.
  Var forward(Tape& tape, Var x, Mode mode, Rng* rng = nullptr);
  /// Eval-mode convenience on a private tape.
  Tensor forward_eval(const Tensor& batch);

  /// All learnable parameters in fixed construction order.
  std::vector<Parameter*> parameters();
  /// Batch-norm running statistics, same order as construction.
  std::vector<std::pair<std::string, BatchNormStats*>> batch_norm_stats();

  const UNetConfig& config() const { return config_; }
  std::size_t parameter_count();

  /// Spatial shapes of the skip tensors seen by the last forward call
  /// (shallow to deep), for structural assertions.
  const std::vector<std::vector<int>>& last_skip_shapes() const { return last_skip_shapes_; }

 private:
  UNetConfig config_;
  Stage encoder_[4];
  Stage bottleneck_;
  Stage decoder_[4];  // deep (1/8) to shallow (1/1)
  ConvUnit head_;
  std::vector<std::vector<int>> last_skip_shapes_;
};

/// build_unet per the module contract; thin wrapper over the constructor.
UNetModel build_unet(const UNetConfig& config, Rng& rng);

}  // namespace vitiseg

#endif  // VITISEG_UNET_HPP_
