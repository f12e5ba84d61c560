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

#ifndef VITISEG_NADAM_HPP_
#define VITISEG_NADAM_HPP_

#include <vector>

#include "vitiseg/tensor.hpp"

namespace vitiseg {

/// Per-parameter Nadam moments. Slots are parallel to the parameter list the
/// state was built from; frozen parameters keep zero moments and are never
/// touched by a step.
struct NadamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long t = 0;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;

  NadamState() = default;
  explicit NadamState(const std::vector<Parameter*>& params);
};

/// One Nesterov-Adam descent step over `params` using their populated
/// gradients. `weight_decay` couples as a classic L2 term added to the
/// gradient before the moment updates (not decoupled). Increments state.t.
void nadam_step(const std::vector<Parameter*>& params, NadamState& state, Real lr,
                Real weight_decay);

}  // namespace vitiseg

#endif  // VITISEG_NADAM_HPP_
