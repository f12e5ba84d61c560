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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vitiseg/errors.hpp"
#include "vitiseg/manifest.hpp"
#include "vitiseg/metrics.hpp"
#include "vitiseg/model_io.hpp"
#include "vitiseg/parallel.hpp"
#include "vitiseg/png_io.hpp"
#include "vitiseg/search.hpp"
#include "vitiseg/synth.hpp"
#include "vitiseg/train_config.hpp"
#include "vitiseg/trainer.hpp"
#include "vitiseg/watershed.hpp"

namespace fs = std::filesystem;
using namespace vitiseg;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config_path;
  int jobs = 1;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out.flush()) throw DataError("failed writing '" + path + "'");
}

std::vector<ManifestRecord> pick_split(const Manifest& manifest, const std::string& split) {
  if (split == "all") return manifest.records;
  std::vector<ManifestRecord> records = manifest.split(split);
  if (records.empty()) throw DataError("manifest has no '" + split + "' records");
  return records;
}

TrainConfig make_config(const GlobalOpts& global) {
  TrainConfig cfg;
  if (!global.config_path.empty()) cfg = parse_config_file(global.config_path);
  if (global.seed_given) cfg.seed = global.seed;
  return cfg;
}

std::string format_history(const TrainHistory& history) {
  std::string out = "epoch,train_loss,train_ji,val_ji,val_thresholded_ji\n";
  char line[176];
  for (const EpochStats& e : history) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss,
                  e.train_ji, e.val_ji, e.val_thresholded_ji);
    out += line;
  }
  return out;
}

int run_synth(const GlobalOpts& global, const std::string& out_dir, int count, int size) {
  const Manifest manifest = synth_dataset(count, size, global.seed, out_dir);
  std::printf("wrote %zu image/mask pairs under %s\n", manifest.size(), out_dir.c_str());
  return 0;
}

int run_split(const GlobalOpts& global, const std::string& in_path, const std::string& out_path,
              double train, double val, double test) {
  const Manifest manifest = load_manifest(in_path);
  const Manifest assigned = split_dataset(manifest, {train, val, test}, global.seed);
  save_manifest(assigned, out_path);
  std::printf("split %zu records: %zu train / %zu val / %zu test -> %s\n", assigned.size(),
              assigned.split("train").size(), assigned.split("val").size(),
              assigned.split("test").size(), out_path.c_str());
  return 0;
}

int run_train(const GlobalOpts& global, const std::string& manifest_path,
              const std::string& model_path, const std::string& history_path, bool combine,
              bool quiet) {
  TrainConfig cfg = make_config(global);
  if (combine) cfg.combine = true;
  const Manifest manifest = load_manifest(manifest_path);
  EpochCallback on_epoch;
  if (!quiet) {
    on_epoch = [](const EpochStats& e) {
      std::printf("epoch %3d  loss %.6f  train_ji %.4f  val_ji %.4f  val_tji %.4f\n", e.epoch,
                  e.train_loss, e.train_ji, e.val_ji, e.val_thresholded_ji);
      std::fflush(stdout);
    };
  }
  TrainResult result = train(manifest, cfg, global.jobs, on_epoch);
  save_model(result.model, model_path);
  if (!history_path.empty()) write_text(history_path, format_history(result.history));
  if (result.best_epoch >= 0) {
    std::printf("saved checkpoint from epoch %d (val_ji %.4f, val_tji %.4f) to %s\n",
                result.best_epoch, result.best_val_ji, result.best_val_thresholded_ji,
                model_path.c_str());
  } else {
    std::printf("saved final model (no validation split) to %s\n", model_path.c_str());
  }
  if (result.early_stopped) std::printf("stopped early: train JI reached the configured bar\n");
  return 0;
}

int run_predict(const GlobalOpts& global, const std::string& manifest_path,
                const std::string& model_path, const std::string& out_dir,
                const std::string& split) {
  const Manifest manifest = load_manifest(manifest_path);
  const std::vector<ManifestRecord> records = pick_split(manifest, split);
  UNetModel model = load_model(model_path);
  const std::vector<PredictFailure> failures =
      predict_split(model, records, out_dir, global.jobs);
  std::printf("wrote %zu confidence maps to %s\n", records.size() - failures.size(),
              out_dir.c_str());
  for (const PredictFailure& f : failures) {
    std::fprintf(stderr, "predict failed for '%s': %s\n", f.image_id.c_str(),
                 f.message.c_str());
  }
  return failures.empty() ? 0 : 2;
}

int run_refine(const GlobalOpts& global, const std::string& manifest_path,
               const std::string& pred_dir, const std::string& out_dir,
               const std::string& split, const std::string& surface, int connectivity) {
  const Manifest manifest = load_manifest(manifest_path);
  const std::vector<ManifestRecord> records = pick_split(manifest, split);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("refine: cannot create output directory '" + out_dir + "'");

  RefineOptions options;
  options.flood_on_confidence = surface == "confidence";
  options.connectivity = connectivity;

  const int n = static_cast<int>(records.size());
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> fallbacks(static_cast<std::size_t>(n), 0);
  parallel_for(global.jobs, n, [&](int i) {
    const ManifestRecord& rec = records[static_cast<std::size_t>(i)];
    try {
      const MaskImage conf = load_mask((fs::path(pred_dir) / (rec.image_id + ".png")).string());
      RasterImage raster = load_image(rec.image_path);
      raster = resize(raster, conf.width, conf.height);
      const RefineResult refined = refine(conf, to_float(raster), options);
      save_mask(refined.mask, (fs::path(out_dir) / (rec.image_id + ".png")).string());
      fallbacks[static_cast<std::size_t>(i)] = refined.fallback ? 1 : 0;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });

  int failed = 0;
  int fell_back = 0;
  for (int i = 0; i < n; ++i) {
    if (!errors[static_cast<std::size_t>(i)].empty()) {
      ++failed;
      std::fprintf(stderr, "refine failed for '%s': %s\n",
                   records[static_cast<std::size_t>(i)].image_id.c_str(),
                   errors[static_cast<std::size_t>(i)].c_str());
    }
    fell_back += fallbacks[static_cast<std::size_t>(i)];
  }
  std::printf("refined %d masks to %s (%d fallback)\n", n - failed, out_dir.c_str(), fell_back);
  return failed == 0 ? 0 : 2;
}

int run_evaluate(const GlobalOpts& global, const std::string& manifest_path,
                 const std::string& pred_dir, const std::string& out_path,
                 const std::string& split, double threshold, bool refined) {
  const Manifest manifest = load_manifest(manifest_path);
  const std::vector<ManifestRecord> records = pick_split(manifest, split);
  const EvaluateResult result =
      evaluate_split(records, pred_dir, threshold, refined, global.jobs);
  const std::string text = format_report(result.report);
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_text(out_path, text);
    std::printf("wrote report for %zu images to %s\n", result.report.rows.size(),
                out_path.c_str());
  }
  for (const std::string& id : result.missing) {
    std::fprintf(stderr, "missing prediction for '%s' (excluded)\n", id.c_str());
  }
  return result.missing.empty() ? 0 : 2;
}

int run_search(const GlobalOpts& global, const std::string& manifest_path, int trials,
               const std::string& out_path) {
  const TrainConfig base = make_config(global);
  const Manifest manifest = load_manifest(manifest_path);
  const SearchSpace space;
  const TrialCallback on_trial = [](const TrialResult& t) {
    std::printf("trial %2d  lr %.3e  wd %.3e  dropout %.3f  batch %2d  tji %.4f%s\n", t.trial,
                t.config.lr, t.config.weight_decay, t.config.dropout, t.config.batch_size,
                t.mean_thresholded_ji, t.diverged ? "  (diverged)" : "");
    std::fflush(stdout);
  };
  const std::vector<TrialResult> results =
      random_search(manifest, space, trials, base, global.seed, global.jobs, on_trial);
  write_text(out_path, format_trials(results));
  const TrialResult& best = results.front();
  std::printf("best: trial %d (seed %llu) mean_tji %.4f mean_ji %.4f -> %s\n", best.trial,
              static_cast<unsigned long long>(best.seed), best.mean_thresholded_ji,
              best.mean_ji, out_path.c_str());
  return 0;
}

int run_overlay(const GlobalOpts& global, const std::string& manifest_path,
                const std::string& pred_dir, const std::string& out_dir,
                const std::string& split) {
  const Manifest manifest = load_manifest(manifest_path);
  const std::vector<ManifestRecord> records = pick_split(manifest, split);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("overlay: cannot create output directory '" + out_dir + "'");

  const int n = static_cast<int>(records.size());
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  parallel_for(global.jobs, n, [&](int i) {
    const ManifestRecord& rec = records[static_cast<std::size_t>(i)];
    try {
      const MaskImage pred = binarize_mask(
          load_mask((fs::path(pred_dir) / (rec.image_id + ".png")).string()));
      const RasterImage img = resize(load_image(rec.image_path), pred.width, pred.height);
      const MaskImage truth =
          binarize_mask(resize(load_mask(rec.mask_path), pred.width, pred.height));
      save_image(overlay(img, truth, pred),
                 (fs::path(out_dir) / (rec.image_id + ".png")).string());
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });

  int failed = 0;
  for (int i = 0; i < n; ++i) {
    if (!errors[static_cast<std::size_t>(i)].empty()) {
      ++failed;
      std::fprintf(stderr, "overlay failed for '%s': %s\n",
                   records[static_cast<std::size_t>(i)].image_id.c_str(),
                   errors[static_cast<std::size_t>(i)].c_str());
    }
  }
  std::printf("wrote %d overlays to %s\n", n - failed, out_dir.c_str());
  return failed == 0 ? 0 : 2;
}

int run(int argc, char** argv) {
  CLI::App app{"vitiligo lesion segmentation pipeline"};
  app.require_subcommand(1);

  GlobalOpts global;
  app.add_option("--seed", global.seed, "global random seed")
      ->each([&global](const std::string&) { global.seed_given = true; });
  app.add_option("--config", global.config_path, "training config file (key = value lines)");
  app.add_option("--jobs", global.jobs, "worker threads for data-parallel stages")
      ->check(CLI::PositiveNumber);

  int exit_code = 0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic skin/lesion dataset");
  synth->fallthrough();
  std::string synth_out;
  int synth_count = 24;
  int synth_size = 64;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--count", synth_count, "number of images");
  synth->add_option("--size", synth_size, "square image size in pixels");
  synth->callback([&] { exit_code = run_synth(global, synth_out, synth_count, synth_size); });

  auto* split = app.add_subcommand("split", "assign train/val/test splits in a manifest");
  split->fallthrough();
  std::string split_in, split_out;
  double ratio_train = 0.6, ratio_val = 0.2, ratio_test = 0.2;
  split->add_option("--manifest", split_in, "input manifest")->required();
  split->add_option("--out", split_out, "output manifest")->required();
  split->add_option("--train", ratio_train, "train fraction");
  split->add_option("--val", ratio_val, "val fraction");
  split->add_option("--test", ratio_test, "test fraction");
  split->callback([&] {
    exit_code = run_split(global, split_in, split_out, ratio_train, ratio_val, ratio_test);
  });

  auto* tr = app.add_subcommand("train", "train a model on the manifest's train split");
  tr->fallthrough();
  std::string train_manifest, train_model, train_history;
  bool train_combine = false, train_quiet = false;
  tr->add_option("--manifest", train_manifest, "dataset manifest")->required();
  tr->add_option("--model", train_model, "output model file")->required();
  tr->add_option("--history", train_history, "optional per-epoch history CSV");
  tr->add_flag("--combine", train_combine, "fold the val split into train");
  tr->add_flag("--quiet", train_quiet, "suppress per-epoch lines");
  tr->callback([&] {
    exit_code = run_train(global, train_manifest, train_model, train_history, train_combine,
                          train_quiet);
  });

  auto* pred = app.add_subcommand("predict", "write per-image confidence maps");
  pred->fallthrough();
  std::string pred_manifest, pred_model, pred_out, pred_split = "test";
  pred->add_option("--manifest", pred_manifest, "dataset manifest")->required();
  pred->add_option("--model", pred_model, "trained model file")->required();
  pred->add_option("--out", pred_out, "output directory")->required();
  pred->add_option("--split", pred_split, "split to predict (train/val/test/all)");
  pred->callback([&] {
    exit_code = run_predict(global, pred_manifest, pred_model, pred_out, pred_split);
  });

  auto* ref = app.add_subcommand("refine", "watershed-refine confidence maps into masks");
  ref->fallthrough();
  std::string ref_manifest, ref_pred, ref_out, ref_split = "test", ref_surface = "image";
  int ref_conn = 4;
  ref->add_option("--manifest", ref_manifest, "dataset manifest (for the images)")->required();
  ref->add_option("--pred", ref_pred, "directory of confidence maps")->required();
  ref->add_option("--out", ref_out, "output directory for refined masks")->required();
  ref->add_option("--split", ref_split, "split to refine (train/val/test/all)");
  ref->add_option("--surface", ref_surface, "flood surface: image or confidence")
      ->check(CLI::IsMember({"image", "confidence"}));
  ref->add_option("--connectivity", ref_conn, "4 or 8")->check(CLI::IsMember({4, 8}));
  ref->callback([&] {
    exit_code =
        run_refine(global, ref_manifest, ref_pred, ref_out, ref_split, ref_surface, ref_conn);
  });

  auto* ev = app.add_subcommand("evaluate", "score predictions against ground truth");
  ev->fallthrough();
  std::string ev_manifest, ev_pred, ev_out, ev_split = "test";
  double ev_threshold = 0.65;
  bool ev_refined = false;
  ev->add_option("--manifest", ev_manifest, "dataset manifest")->required();
  ev->add_option("--pred", ev_pred, "directory of predictions")->required();
  ev->add_option("--out", ev_out, "report file (stdout when omitted)");
  ev->add_option("--split", ev_split, "split to score (train/val/test/all)");
  ev->add_option("--threshold", ev_threshold, "thresholded-JI cutoff");
  ev->add_flag("--refined", ev_refined, "predictions are refined binary masks");
  ev->callback([&] {
    exit_code = run_evaluate(global, ev_manifest, ev_pred, ev_out, ev_split, ev_threshold,
                             ev_refined);
  });

  auto* sr = app.add_subcommand("search", "random hyperparameter search");
  sr->fallthrough();
  std::string sr_manifest, sr_out;
  int sr_trials = 8;
  sr->add_option("--manifest", sr_manifest, "dataset manifest")->required();
  sr->add_option("--out", sr_out, "trial results CSV")->required();
  sr->add_option("--trials", sr_trials, "number of trials")->check(CLI::PositiveNumber);
  sr->callback([&] { exit_code = run_search(global, sr_manifest, sr_trials, sr_out); });

  auto* ov = app.add_subcommand("overlay", "render TP/FP/FN overlays");
  ov->fallthrough();
  std::string ov_manifest, ov_pred, ov_out, ov_split = "test";
  ov->add_option("--manifest", ov_manifest, "dataset manifest")->required();
  ov->add_option("--pred", ov_pred, "directory of predictions")->required();
  ov->add_option("--out", ov_out, "output directory")->required();
  ov->add_option("--split", ov_split, "split to render (train/val/test/all)");
  ov->callback([&] { exit_code = run_overlay(global, ov_manifest, ov_pred, ov_out, ov_split); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
