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

#ifndef VITISEG_GRAD_CHECK_HPP_
#define VITISEG_GRAD_CHECK_HPP_

#include <functional>
#include <vector>

#include "vitiseg/tensor.hpp"

namespace vitiseg {

/// A scalar-valued network fragment: builds a fresh tape, runs forward from
/// the current parameter values, and returns the loss. Must be a pure
/// function of the parameters (stochastic ops have to replay the same
/// randomness on every call).
using Fragment = std::function<Real()>;

/// A gradient pass for the same fragment: runs forward + backward and leaves
/// the adjoints in the parameters' grad slots.
using FragmentBackward = std::function<void()>;

/// Compares analytic gradients against central finite differences.
///
/// Returns the max over checked parameter elements of
///   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// `max_elems_per_param` caps how many elements of each parameter are
/// perturbed (0 = all). Sampled elements are chosen by a deterministic
/// stride so repeated runs check the same set; sampling keeps full-network
/// checks tractable.
Real grad_check(const std::vector<Parameter*>& params, const Fragment& fragment,
                const FragmentBackward& backward, Real step = 1e-4,
                std::size_t max_elems_per_param = 0);

}  // namespace vitiseg

#endif  // VITISEG_GRAD_CHECK_HPP_
