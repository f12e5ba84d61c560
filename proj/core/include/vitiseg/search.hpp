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

#ifndef VITISEG_SEARCH_HPP_
#define VITISEG_SEARCH_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vitiseg/manifest.hpp"
#include "vitiseg/rng.hpp"
#include "vitiseg/train_config.hpp"

namespace vitiseg {

/// Hyperparameter ranges for random search. lr and weight_decay sample
/// log-uniformly, dropout and lr_decay uniformly, batch_size from the listed
/// choices.
struct SearchSpace {
  Real lr_lo = 1e-5;
  Real lr_hi = 1e-2;
  Real dropout_lo = 0.0;
  Real dropout_hi = 0.5;
  Real weight_decay_lo = 1e-6;
  Real weight_decay_hi = 1e-3;
  Real lr_decay_lo = 0.0;
  Real lr_decay_hi = 1e-3;
  std::vector<int> batch_sizes = {4, 8, 16};

  void validate() const;
};

struct TrialResult {
  int trial = 0;
  TrainConfig config;
  Real mean_ji = 0.0;
  Real mean_thresholded_ji = 0.0;
  Real wall_seconds = 0.0;
  std::uint64_t seed = 0;
  bool diverged = false;
};

using TrialCallback = std::function<void(const TrialResult&)>;

/// One hyperparameter draw on top of `base`, in the fixed order lr, dropout,
/// weight_decay, lr_decay, batch_size.
TrainConfig sample_config(const SearchSpace& space, const TrainConfig& base, Rng& rng);

/// `budget` independent train/validate cycles with per-trial derived seeds;
/// a diverging trial scores 0 and the search continues. Results come back
/// sorted by mean thresholded JI descending, ties by mean JI then seed.
/// Requires a nonempty val split for scoring.
std::vector<TrialResult> random_search(const Manifest& manifest, const SearchSpace& space,
                                       int budget, const TrainConfig& base,
                                       std::uint64_t seed, int jobs = 1,
                                       const TrialCallback& on_trial = {});

/// CSV (header + one row per trial) in the sorted order.
std::string format_trials(const std::vector<TrialResult>& trials);

}  // namespace vitiseg

#endif  // VITISEG_SEARCH_HPP_
