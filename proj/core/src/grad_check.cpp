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

#include "vitiseg/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace vitiseg {

Real grad_check(const std::vector<Parameter*>& params, const Fragment& fragment,
                const FragmentBackward& backward, Real step,
                std::size_t max_elems_per_param) {
  backward();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  Real worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (!p.trainable) continue;
    const std::size_t n = p.value.size();
    std::size_t stride = 1;
    if (max_elems_per_param > 0 && n > max_elems_per_param) {
      stride = (n + max_elems_per_param - 1) / max_elems_per_param;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const Real saved = p.value[i];
      p.value[i] = saved + step;
      const Real plus = fragment();
      p.value[i] = saved - step;
      const Real minus = fragment();
      p.value[i] = saved;
      const Real numeric = (plus - minus) / (2.0 * step);
      const Real a = analytic[k][i];
      const Real denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace vitiseg
