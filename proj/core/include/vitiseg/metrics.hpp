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

#ifndef VITISEG_METRICS_HPP_
#define VITISEG_METRICS_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vitiseg/tape.hpp"
#include "vitiseg/tensor.hpp"

namespace vitiseg {

/// Per-pixel {0,1} label grid; 1 marks lesion. Row-major, y-major like the
/// image rasters it is derived from.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return labels.size(); }
};

/// Hard intersection-over-union over positive pixels. Two masks with no
/// positive pixels at all agree perfectly and score 1.0.
Real jaccard(const BinaryMask& a, const BinaryMask& b);

/// ISIC-style score: anything under the threshold collapses to 0, otherwise
/// the JI passes through unchanged (strict less-than).
Real thresholded_jaccard(Real ji, Real threshold = 0.65);

/// Mask as a 1x1xHxW tensor of 0/1 values, the target layout the losses eat.
Tensor mask_to_tensor(const BinaryMask& m);

/// Smoothed differentiable Jaccard (sum p*g + eps) / (sum p + sum g - sum p*g
/// + eps), eps = 1e-7, pooled over every element of pred/target. Plain-value
/// flavour for evaluation, tape flavour (with analytic adjoint) for training.
Real soft_jaccard_value(const Tensor& pred, const Tensor& target);
Var soft_jaccard(Tape& tape, Var pred, const Tensor& target);

/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
Real bce_value(const Tensor& pred, const Tensor& target);
Var bce(Tape& tape, Var pred, const Tensor& target);

/// Training loss: bce + (1 - soft_jaccard), equal weights.
Var bce_ji_loss(Tape& tape, Var pred, const Tensor& target);

struct ScoreRow {
  std::string id;
  Real ji = 0.0;
  Real thresholded_ji = 0.0;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;
  Real threshold = 0.65;
  Real mean_ji = 0.0;
  Real mean_thresholded_ji = 0.0;
  int below_threshold = 0;
};

/// Scores (prediction, truth) pairs image by image. The id overload labels
/// the report rows; the plain overload numbers them 0..n-1.
ScoreReport score_dataset(const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs,
                          Real threshold = 0.65);
ScoreReport score_dataset(const std::vector<std::string>& ids,
                          const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs,
                          Real threshold = 0.65);

/// CSV rows (header + one row per image) followed by a '#'-prefixed summary
/// footer. Fixed %.6f formatting so reruns are byte-identical.
std::string format_report(const ScoreReport& report);

}  // namespace vitiseg

#endif  // VITISEG_METRICS_HPP_
