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

#include "vitiseg/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "vitiseg/errors.hpp"
#include "vitiseg/trainer.hpp"

namespace vitiseg {

void SearchSpace::validate() const {
  if (lr_lo <= 0.0 || lr_hi < lr_lo) throw ConfigError("search: bad lr range");
  if (weight_decay_lo <= 0.0 || weight_decay_hi < weight_decay_lo) {
    throw ConfigError("search: bad weight_decay range");
  }
  if (dropout_lo < 0.0 || dropout_hi >= 1.0 || dropout_hi < dropout_lo) {
    throw ConfigError("search: bad dropout range");
  }
  if (lr_decay_lo < 0.0 || lr_decay_hi < lr_decay_lo) {
    throw ConfigError("search: bad lr_decay range");
  }
  if (batch_sizes.empty()) throw ConfigError("search: batch_sizes is empty");
  for (const int b : batch_sizes) {
    if (b < 2) throw ConfigError("search: batch sizes must be >= 2");
  }
}

namespace {

Real log_uniform(Rng& rng, Real lo, Real hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

}  // namespace

TrainConfig sample_config(const SearchSpace& space, const TrainConfig& base, Rng& rng) {
  TrainConfig cfg = base;
  cfg.lr = log_uniform(rng, space.lr_lo, space.lr_hi);
  cfg.dropout = rng.uniform(space.dropout_lo, space.dropout_hi);
  cfg.weight_decay = log_uniform(rng, space.weight_decay_lo, space.weight_decay_hi);
  cfg.lr_decay = rng.uniform(space.lr_decay_lo, space.lr_decay_hi);
  cfg.batch_size = space.batch_sizes[rng.uniform_int(space.batch_sizes.size())];
  return cfg;
}

std::vector<TrialResult> random_search(const Manifest& manifest, const SearchSpace& space,
                                       int budget, const TrainConfig& base,
                                       std::uint64_t seed, int jobs,
                                       const TrialCallback& on_trial) {
  if (budget < 1) throw ConfigError("search: budget must be >= 1");
  space.validate();
  if (manifest.split("val").empty() && !base.combine) {
    throw ConfigError("search: manifest needs a nonempty val split to score trials");
  }
  if (base.combine) {
    throw ConfigError("search: --combine leaves no validation split to score trials");
  }

  std::vector<TrialResult> trials;
  trials.reserve(static_cast<std::size_t>(budget));
  for (int t = 0; t < budget; ++t) {
    Rng draw(derive_seed(seed, "search", static_cast<std::uint64_t>(t)));
    TrialResult trial;
    trial.trial = t;
    trial.config = sample_config(space, base, draw);
    trial.seed = derive_seed(seed, "trial", static_cast<std::uint64_t>(t));
    trial.config.seed = trial.seed;

    const auto t0 = std::chrono::steady_clock::now();
    try {
      const TrainResult run = train(manifest, trial.config, jobs);
      trial.mean_ji = run.best_val_ji;
      trial.mean_thresholded_ji = run.best_val_thresholded_ji;
    } catch (const NumericError&) {
      trial.diverged = true;
      trial.mean_ji = 0.0;
      trial.mean_thresholded_ji = 0.0;
    }
    trial.wall_seconds =
        std::chrono::duration<Real>(std::chrono::steady_clock::now() - t0).count();
    if (on_trial) on_trial(trial);
    trials.push_back(std::move(trial));
  }

  std::stable_sort(trials.begin(), trials.end(), [](const TrialResult& a, const TrialResult& b) {
    if (a.mean_thresholded_ji != b.mean_thresholded_ji) {
      return a.mean_thresholded_ji > b.mean_thresholded_ji;
    }
    if (a.mean_ji != b.mean_ji) return a.mean_ji > b.mean_ji;
    return a.seed < b.seed;
  });
  return trials;
}

std::string format_trials(const std::vector<TrialResult>& trials) {
  std::string out =
      "trial,seed,lr,lr_decay,weight_decay,dropout,batch_size,mean_ji,"
      "mean_thresholded_ji,wall_seconds,diverged\n";
  char line[320];
  for (const TrialResult& t : trials) {
    std::snprintf(line, sizeof(line), "%d,%llu,%.9g,%.9g,%.9g,%.9g,%d,%.6f,%.6f,%.3f,%d\n",
                  t.trial, static_cast<unsigned long long>(t.seed), t.config.lr,
                  t.config.lr_decay, t.config.weight_decay, t.config.dropout,
                  t.config.batch_size, t.mean_ji, t.mean_thresholded_ji, t.wall_seconds,
                  t.diverged ? 1 : 0);
    out += line;
  }
  return out;
}

}  // namespace vitiseg
