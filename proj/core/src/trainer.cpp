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

#include "vitiseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <thread>
#include <utility>

#include "vitiseg/augment.hpp"
#include "vitiseg/errors.hpp"
#include "vitiseg/nadam.hpp"
#include "vitiseg/parallel.hpp"
#include "vitiseg/png_io.hpp"
#include "vitiseg/rng.hpp"
#include "vitiseg/tape.hpp"

namespace vitiseg {

namespace {

/// Strided variant of parallel_for handing each worker a stable id, for
/// loops that keep per-worker model copies. Same per-index-slot and
/// first-exception rules.
template <typename Fn>
void run_workers(int jobs, int count, Fn&& fn) {
  const int workers = std::max(1, std::min(jobs, count));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(0, i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) fn(w, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

BinaryMask probability_mask(const Tensor& out, int n) {
  const int h = out.dim(2), w = out.dim(3);
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      m.at(x, y) = out.at(n, 1, y, x) >= 0.5 ? 1 : 0;
    }
  }
  return m;
}

}  // namespace

std::vector<Sample> load_samples(const std::vector<ManifestRecord>& records, int input_size,
                                 int jobs) {
  std::vector<Sample> out(records.size());
  parallel_for(jobs, static_cast<int>(records.size()), [&](int i) {
    const ManifestRecord& rec = records[static_cast<std::size_t>(i)];
    RasterImage img = resize(load_image(rec.image_path), input_size, input_size);
    MaskImage mask = binarize_mask(resize(load_mask(rec.mask_path), input_size, input_size));
    out[static_cast<std::size_t>(i)] = {rec.image_id, to_float(img), std::move(mask)};
  });
  return out;
}

TrainResult train(const Manifest& manifest, const TrainConfig& config, int jobs,
                  const EpochCallback& on_epoch) {
  config.validate();
  std::vector<ManifestRecord> train_recs = manifest.split("train");
  std::vector<ManifestRecord> val_recs = manifest.split("val");
  if (config.combine) {
    train_recs.insert(train_recs.end(), val_recs.begin(), val_recs.end());
    val_recs.clear();
  }
  if (train_recs.empty()) throw DataError("train: training split is empty");

  UNetConfig net = config.net;
  net.dropout_rate = config.dropout;
  const int size = net.input_size;
  if (net.use_batch_norm && train_recs.size() < 2) {
    throw DataError("train: batch norm needs at least 2 training images");
  }

  std::vector<Sample> train_set = load_samples(train_recs, size, jobs);
  std::vector<Sample> val_set = load_samples(val_recs, size, jobs);

  Rng init_rng(derive_seed(config.seed, "init", 0));
  UNetModel model(net, init_rng);
  std::vector<Parameter*> params = model.parameters();
  NadamState opt(params);
  Rng dropout_rng(derive_seed(config.seed, "dropout", 0));

  TrainResult result;
  UNetModel best_model;
  bool have_best = false;
  long step = 0;
  const int n = static_cast<int>(train_set.size());
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    Real loss_sum = 0.0;
    Real ji_sum = 0.0;
    int images_seen = 0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int count = std::min(config.batch_size, n - start);
      if (count == 1 && net.use_batch_norm) continue;

      Tensor x({count, 3, size, size});
      Tensor target({count, 1, size, size});
      std::vector<BinaryMask> truths(static_cast<std::size_t>(count));
      for (int b = 0; b < count; ++b) {
        const Sample& s = train_set[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
        Rng aug_rng(derive_seed(config.seed, s.id, static_cast<std::uint64_t>(epoch)));
        auto [aug_img, aug_mask] = augment(s.image, s.mask, config.augment, aug_rng);
        const FloatImage norm = normalize(aug_img);
        std::memcpy(x.data() + static_cast<std::size_t>(b) * 3 * plane, norm.data.data(),
                    sizeof(Real) * 3 * plane);
        BinaryMask truth = to_binary(aug_mask);
        for (int y = 0; y < size; ++y) {
          for (int xx = 0; xx < size; ++xx) {
            target.at(b, 0, y, xx) = truth.at(xx, y);
          }
        }
        truths[static_cast<std::size_t>(b)] = std::move(truth);
      }

      Tape tape;
      Var input = tape.input(std::move(x));
      Var positive = [&]() -> Var {
        try {
          Var out = model.forward(tape, input, Mode::kTrain, &dropout_rng);
          return tape.slice_channels(out, 1, 1);
        } catch (const NumericError& e) {
          throw NumericError("train: diverged at epoch " + std::to_string(epoch) +
                             " step " + std::to_string(step) + ": " + e.what());
        }
      }();
      Var loss = bce_ji_loss(tape, positive, target);
      const Real loss_value = loss.value()[0];
      if (!std::isfinite(loss_value)) {
        throw NumericError("train: loss diverged at epoch " + std::to_string(epoch) +
                           " step " + std::to_string(step));
      }
      const Tensor& probs = positive.value();
      for (int b = 0; b < count; ++b) {
        BinaryMask pred(size, size);
        for (int y = 0; y < size; ++y) {
          for (int xx = 0; xx < size; ++xx) {
            pred.at(xx, y) = probs.at(b, 0, y, xx) >= 0.5 ? 1 : 0;
          }
        }
        ji_sum += jaccard(pred, truths[static_cast<std::size_t>(b)]);
      }
      loss_sum += loss_value * count;
      images_seen += count;

      try {
        tape.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError("train: diverged at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step) + ": " + e.what());
      }
      const Real lr_t = config.lr / (1.0 + config.lr_decay * static_cast<Real>(step));
      nadam_step(params, opt, lr_t, config.weight_decay);
      ++step;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = images_seen > 0 ? loss_sum / images_seen : 0.0;
    stats.train_ji = images_seen > 0 ? ji_sum / images_seen : 0.0;
    if (!val_set.empty()) {
      const SplitScore vs = score_model(model, val_set, 0.65, jobs);
      stats.val_ji = vs.mean_ji;
      stats.val_thresholded_ji = vs.mean_thresholded_ji;
      if (!have_best || vs.mean_thresholded_ji > result.best_val_thresholded_ji) {
        have_best = true;
        best_model = model;
        result.best_epoch = epoch;
        result.best_val_ji = vs.mean_ji;
        result.best_val_thresholded_ji = vs.mean_thresholded_ji;
      }
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (stats.train_ji >= config.early_stop_train_ji) {
      result.early_stopped = true;
      break;
    }
  }

  result.model = have_best ? std::move(best_model) : std::move(model);
  return result;
}

MaskImage predict_confidence(UNetModel& model, const RasterImage& image) {
  const int size = model.config().input_size;
  const RasterImage resized = resize(image, size, size);
  const Tensor out = model.forward_eval(image_to_tensor(normalize(resized)));
  return probability_to_confidence(out, 0, 1);
}

std::vector<PredictFailure> predict_split(UNetModel& model,
                                          const std::vector<ManifestRecord>& records,
                                          const std::string& out_dir, int jobs) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("predict: cannot create output directory '" + out_dir + "'");

  const int n = static_cast<int>(records.size());
  const int workers = std::max(1, std::min(jobs, n));
  std::vector<UNetModel> copies;
  if (workers > 1) copies.assign(static_cast<std::size_t>(workers), model);
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  run_workers(jobs, n, [&](int w, int i) {
    UNetModel& worker_model = workers > 1 ? copies[static_cast<std::size_t>(w)] : model;
    const ManifestRecord& rec = records[static_cast<std::size_t>(i)];
    try {
      const RasterImage img = load_image(rec.image_path);
      const MaskImage conf = predict_confidence(worker_model, img);
      save_mask(conf, (fs::path(out_dir) / (rec.image_id + ".png")).string());
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });

  std::vector<PredictFailure> failures;
  for (int i = 0; i < n; ++i) {
    if (!errors[static_cast<std::size_t>(i)].empty()) {
      failures.push_back({records[static_cast<std::size_t>(i)].image_id,
                          errors[static_cast<std::size_t>(i)]});
    }
  }
  return failures;
}

SplitScore score_model(UNetModel& model, const std::vector<Sample>& samples, Real threshold,
                       int jobs) {
  SplitScore score;
  const int n = static_cast<int>(samples.size());
  if (n == 0) return score;

  const int workers = std::max(1, std::min(jobs, n));
  std::vector<UNetModel> copies;
  if (workers > 1) copies.assign(static_cast<std::size_t>(workers), model);
  std::vector<Real> jis(static_cast<std::size_t>(n), 0.0);
  run_workers(jobs, n, [&](int w, int i) {
    UNetModel& worker_model = workers > 1 ? copies[static_cast<std::size_t>(w)] : model;
    const Sample& s = samples[static_cast<std::size_t>(i)];
    const Tensor out = worker_model.forward_eval(image_to_tensor(normalize(s.image)));
    jis[static_cast<std::size_t>(i)] = jaccard(probability_mask(out, 0), to_binary(s.mask));
  });

  for (int i = 0; i < n; ++i) {
    score.mean_ji += jis[static_cast<std::size_t>(i)];
    score.mean_thresholded_ji += thresholded_jaccard(jis[static_cast<std::size_t>(i)], threshold);
  }
  score.mean_ji /= n;
  score.mean_thresholded_ji /= n;
  return score;
}

EvaluateResult evaluate_split(const std::vector<ManifestRecord>& records,
                              const std::string& pred_dir, Real threshold, bool refined,
                              int jobs) {
  namespace fs = std::filesystem;
  const int n = static_cast<int>(records.size());
  struct Slot {
    bool ok = false;
    BinaryMask pred;
    BinaryMask truth;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> absent(static_cast<std::size_t>(n), 0);
  parallel_for(jobs, n, [&](int i) {
    const ManifestRecord& rec = records[static_cast<std::size_t>(i)];
    MaskImage pred_gray;
    try {
      pred_gray = load_mask((fs::path(pred_dir) / (rec.image_id + ".png")).string());
    } catch (const std::exception&) {
      absent[static_cast<std::size_t>(i)] = 1;
      return;
    }
    if (refined) {
      for (const std::uint8_t v : pred_gray.pixels) {
        if (v != 0 && v != 255) {
          throw DataError("evaluate: prediction for '" + rec.image_id +
                          "' is not a binary refined mask");
        }
      }
    }
    MaskImage truth = load_mask(rec.mask_path);
    truth = binarize_mask(resize(truth, pred_gray.width, pred_gray.height));
    Slot& slot = slots[static_cast<std::size_t>(i)];
    slot.pred = to_binary(binarize_mask(pred_gray));
    slot.truth = to_binary(truth);
    slot.ok = true;
  });

  EvaluateResult result;
  std::vector<std::string> ids;
  std::vector<std::pair<BinaryMask, BinaryMask>> pairs;
  for (int i = 0; i < n; ++i) {
    if (absent[static_cast<std::size_t>(i)]) {
      result.missing.push_back(records[static_cast<std::size_t>(i)].image_id);
      continue;
    }
    Slot& slot = slots[static_cast<std::size_t>(i)];
    ids.push_back(records[static_cast<std::size_t>(i)].image_id);
    pairs.emplace_back(std::move(slot.pred), std::move(slot.truth));
  }
  if (ids.empty()) {
    throw DataError("evaluate: no predictions found in '" + pred_dir + "'");
  }
  result.report = score_dataset(ids, pairs, threshold);
  return result;
}

}  // namespace vitiseg
