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

#ifndef VITISEG_TRAINER_HPP_
#define VITISEG_TRAINER_HPP_

#include <functional>
#include <string>
#include <vector>

#include "vitiseg/image.hpp"
#include "vitiseg/manifest.hpp"
#include "vitiseg/metrics.hpp"
#include "vitiseg/train_config.hpp"
#include "vitiseg/unet.hpp"

namespace vitiseg {

/// One record staged for training: image resized to the network input size
/// and kept on the 0..255 float scale (augmentation runs before
/// normalization), mask resized nearest and binarized.
struct Sample {
  std::string id;
  FloatImage image;
  MaskImage mask;
};

std::vector<Sample> load_samples(const std::vector<ManifestRecord>& records, int input_size,
                                 int jobs = 1);

struct EpochStats {
  int epoch = 0;
  Real train_loss = 0.0;
  Real train_ji = 0.0;
  /// -1 when there is no validation split (empty or --combine).
  Real val_ji = -1.0;
  Real val_thresholded_ji = -1.0;
};

using TrainHistory = std::vector<EpochStats>;
using EpochCallback = std::function<void(const EpochStats&)>;

struct TrainResult {
  UNetModel model;
  TrainHistory history;
  /// Epoch whose checkpoint `model` holds; -1 means final epoch (no val).
  int best_epoch = -1;
  Real best_val_ji = -1.0;
  Real best_val_thresholded_ji = -1.0;
  bool early_stopped = false;
};

/// The epoch loop. Deterministic from config.seed: weight init, the
/// per-epoch shuffle, per-image augmentation, and dropout all derive child
/// seeds from it. Per-step learning rate lr / (1 + lr_decay * step), step
/// counted from 0 across epochs. Train JI is measured on the train-mode
/// outputs against the augmented masks (probability >= 0.5); validation runs
/// in eval mode after each epoch and the checkpoint with the best (strictly
/// greater) mean thresholded JI is returned. A trailing batch of one is
/// skipped when batch norm is on. Divergence surfaces as NumericError with
/// epoch/step context.
TrainResult train(const Manifest& manifest, const TrainConfig& config, int jobs = 1,
                  const EpochCallback& on_epoch = {});

/// Resize + normalize + eval-mode forward; positive-probability plane as an
/// 8-bit confidence map (round(255 p)).
MaskImage predict_confidence(UNetModel& model, const RasterImage& image);

struct PredictFailure {
  std::string image_id;
  std::string message;
};

/// Writes <out_dir>/<image_id>.png for every record. Per-image failures are
/// collected and the batch continues; the caller decides what a nonempty
/// failure list means.
std::vector<PredictFailure> predict_split(UNetModel& model,
                                          const std::vector<ManifestRecord>& records,
                                          const std::string& out_dir, int jobs = 1);

struct SplitScore {
  Real mean_ji = 0.0;
  Real mean_thresholded_ji = 0.0;
};

/// Eval-mode scores of a model over staged samples (probability >= 0.5
/// against the staged masks).
SplitScore score_model(UNetModel& model, const std::vector<Sample>& samples,
                       Real threshold = 0.65, int jobs = 1);

struct EvaluateResult {
  ScoreReport report;
  /// image_ids whose prediction file was absent or unreadable; they are
  /// excluded from the report.
  std::vector<std::string> missing;
};

/// Scores stored predictions against ground truth. Predictions binarize at
/// 128; with `refined` they must already be strictly binary {0,255} masks.
/// Ground truth is nearest-resized to each prediction's size.
EvaluateResult evaluate_split(const std::vector<ManifestRecord>& records,
                              const std::string& pred_dir, Real threshold = 0.65,
                              bool refined = false, int jobs = 1);

}  // namespace vitiseg

#endif  // VITISEG_TRAINER_HPP_
