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

#include "vitiseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vitiseg/errors.hpp"

namespace vitiseg {

namespace {

constexpr Real kSmooth = 1e-7;
constexpr Real kClampLo = 1e-7;
constexpr Real kClampHi = 1.0 - 1e-7;

void require_match(const Tensor& pred, const Tensor& target, const char* op) {
  if (!pred.same_shape(target)) {
    throw UsageError(std::string(op) + ": pred shape " + pred.shape_str() +
                     " vs target shape " + target.shape_str());
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0 && target[i] != 1.0) {
      throw UsageError(std::string(op) + ": target must be binary");
    }
  }
}

}  // namespace

Real jaccard(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw UsageError("jaccard: mask dims " + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height));
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool pa = a.labels[i] != 0;
    const bool pb = b.labels[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  if (uni == 0) return 1.0;
  return static_cast<Real>(inter) / static_cast<Real>(uni);
}

Real thresholded_jaccard(Real ji, Real threshold) {
  return ji < threshold ? 0.0 : ji;
}

Tensor mask_to_tensor(const BinaryMask& m) {
  Tensor t({1, 1, m.height, m.width});
  for (std::size_t i = 0; i < m.labels.size(); ++i) t[i] = m.labels[i] ? 1.0 : 0.0;
  return t;
}

Real soft_jaccard_value(const Tensor& pred, const Tensor& target) {
  require_match(pred, target, "soft_jaccard");
  Real pg = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pg += pred[i] * target[i];
    sp += pred[i];
    sg += target[i];
  }
  return (pg + kSmooth) / (sp + sg - pg + kSmooth);
}

Var soft_jaccard(Tape& tape, Var pred, const Tensor& target) {
  const Tensor& pv = pred.value();
  require_match(pv, target, "soft_jaccard");
  Real pg = 0.0, sp = 0.0, sg = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    pg += pv[i] * target[i];
    sp += pv[i];
    sg += target[i];
  }
  const Real a = pg + kSmooth;
  const Real b = sp + sg - pg + kSmooth;
  auto backward = [target, a, b](const Tensor&, const Tensor& g,
                                 std::span<const Tensor* const>,
                                 std::span<Tensor* const> in_grads) {
    Tensor& dp = *in_grads[0];
    const Real b2 = b * b;
    for (std::size_t i = 0; i < dp.size(); ++i) {
      dp[i] += g[0] * (target[i] * b - a * (1.0 - target[i])) / b2;
    }
  };
  return tape.custom("soft_jaccard", Tensor::scalar(a / b), {pred}, std::move(backward));
}

Real bce_value(const Tensor& pred, const Tensor& target) {
  require_match(pred, target, "bce");
  Real sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Real p = std::clamp(pred[i], kClampLo, kClampHi);
    sum -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
  }
  return sum / static_cast<Real>(pred.size());
}

Var bce(Tape& tape, Var pred, const Tensor& target) {
  const Tensor& pv = pred.value();
  const Real value = bce_value(pv, target);
  auto backward = [target](const Tensor&, const Tensor& g, std::span<const Tensor* const> in,
                           std::span<Tensor* const> in_grads) {
    const Tensor& pv = *in[0];
    Tensor& dp = *in_grads[0];
    const Real inv_n = 1.0 / static_cast<Real>(pv.size());
    for (std::size_t i = 0; i < pv.size(); ++i) {
      if (pv[i] < kClampLo || pv[i] > kClampHi) continue;  // clamped: flat
      dp[i] += g[0] * inv_n * (pv[i] - target[i]) / (pv[i] * (1.0 - pv[i]));
    }
  };
  return tape.custom("bce", Tensor::scalar(value), {pred}, std::move(backward));
}

Var bce_ji_loss(Tape& tape, Var pred, const Tensor& target) {
  Var b = bce(tape, pred, target);
  Var j = soft_jaccard(tape, pred, target);
  return tape.add(b, tape.affine(j, -1.0, 1.0));
}

ScoreReport score_dataset(const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs,
                          Real threshold) {
  std::vector<std::string> ids;
  ids.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) ids.push_back(std::to_string(i));
  return score_dataset(ids, pairs, threshold);
}

ScoreReport score_dataset(const std::vector<std::string>& ids,
                          const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs,
                          Real threshold) {
  if (pairs.empty()) throw UsageError("score_dataset: empty dataset");
  if (ids.size() != pairs.size()) {
    throw UsageError("score_dataset: " + std::to_string(ids.size()) + " ids for " +
                     std::to_string(pairs.size()) + " pairs");
  }
  ScoreReport report;
  report.threshold = threshold;
  Real sum_ji = 0.0, sum_tji = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Real ji = jaccard(pairs[i].first, pairs[i].second);
    const Real tji = thresholded_jaccard(ji, threshold);
    report.rows.push_back({ids[i], ji, tji});
    sum_ji += ji;
    sum_tji += tji;
    if (ji < threshold) ++report.below_threshold;
  }
  report.mean_ji = sum_ji / static_cast<Real>(pairs.size());
  report.mean_thresholded_ji = sum_tji / static_cast<Real>(pairs.size());
  return report;
}

std::string format_report(const ScoreReport& report) {
  std::string out = "image_id,ji,thresholded_ji\n";
  char buf[160];
  for (const ScoreRow& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", row.id.c_str(), row.ji,
                  row.thresholded_ji);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "# images,%zu\n# mean_ji,%.6f\n# mean_thresholded_ji,%.6f\n"
                "# below_threshold,%d\n# threshold,%.6f\n",
                report.rows.size(), report.mean_ji, report.mean_thresholded_ji,
                report.below_threshold, report.threshold);
  out += buf;
  return out;
}

}  // namespace vitiseg
