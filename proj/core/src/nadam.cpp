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

#include "vitiseg/nadam.hpp"

#include <cmath>

#include "vitiseg/errors.hpp"

namespace vitiseg {

NadamState::NadamState(const std::vector<Parameter*>& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Parameter* p : params) {
    m.push_back(Tensor::zeros(p->value.shape()));
    v.push_back(Tensor::zeros(p->value.shape()));
  }
}

void nadam_step(const std::vector<Parameter*>& params, NadamState& state, Real lr,
                Real weight_decay) {
  if (params.size() != state.m.size()) {
    throw UsageError("nadam_step: state built for " + std::to_string(state.m.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  ++state.t;
  const Real b1 = state.beta1;
  const Real b2 = state.beta2;
  const Real t = static_cast<Real>(state.t);
  const Real mom2_corr = 1.0 - std::pow(b2, t);
  const Real beta1t = std::pow(b1, t);
  const Real mom1_corr = 1.0 - beta1t;
  const Real mom1_corr_next = 1.0 - beta1t * b1;

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.trainable) continue;
    if (!p.grad.same_shape(p.value)) {
      throw UsageError("nadam_step: parameter '" + p.name + "' has no populated gradient");
    }
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const Real g = p.grad[i] + weight_decay * p.value[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      p.value[i] -= lr / (std::sqrt(v[i] / mom2_corr) + state.eps) *
                    (b1 * m[i] / mom1_corr_next + (1.0 - b1) * g / mom1_corr);
    }
  }
}

}  // namespace vitiseg
