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

#include <cmath>
#include <vector>

#include <doctest.h>

#include "test_util.hpp"
#include "vitiseg/nadam.hpp"
#include "vitiseg/rng.hpp"

using namespace vitiseg;
using vitiseg::testing::random_tensor;

namespace {

// Scalar reference walker for the published Nesterov-Adam recurrence, kept
// separate from the production loop on purpose.
struct ScalarNadam {
  double m = 0.0, v = 0.0;
  long t = 0;

  double step(double w, double g, double lr, double decay) {
    ++t;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    g += decay * w;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double v_hat = v / (1.0 - std::pow(b2, t));
    const double m_bar = b1 * m / (1.0 - std::pow(b1, t + 1)) +
                         (1.0 - b1) * g / (1.0 - std::pow(b1, t));
    return w - lr / (std::sqrt(v_hat) + eps) * m_bar;
  }
};

}  // namespace

TEST_SUITE("nadam") {

TEST_CASE("zero gradient and zero decay leave the parameter unchanged") {
  Parameter p("p", Tensor({2}, {1.5, -0.25}));
  std::vector<Parameter*> params{&p};
  NadamState state(params);
  nadam_step(params, state, 0.1, 0.0);
  CHECK(p.value[0] == 1.5);
  CHECK(p.value[1] == -0.25);
  CHECK(state.t == 1);
}

TEST_CASE("first step from w=1, g=1, lr=0.1 lands on the pinned value") {
  Parameter p("p", Tensor({1}, {1.0}));
  p.grad[0] = 1.0;
  std::vector<Parameter*> params{&p};
  NadamState state(params);
  nadam_step(params, state, 0.1, 0.0);
  CHECK(p.value[0] == doctest::Approx(0.8526315804210526).epsilon(1e-15));
  CHECK(state.m[0][0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(state.v[0][0] == doctest::Approx(0.001).epsilon(1e-12));
}

TEST_CASE("identical parameters stay bitwise identical over 100 steps") {
  Parameter a("a", Tensor({1}, {0.7}));
  Parameter b("b", Tensor({1}, {0.7}));
  std::vector<Parameter*> params{&a, &b};
  NadamState state(params);
  Rng rng(55);
  for (int step = 0; step < 100; ++step) {
    const Real g = rng.normal();
    a.grad[0] = g;
    b.grad[0] = g;
    nadam_step(params, state, 0.01, 1e-4);
    CHECK(a.value[0] == b.value[0]);
  }
}

TEST_CASE("frozen parameters are never touched") {
  Parameter p("p", Tensor({1}, {2.0}), false);
  p.grad[0] = 5.0;
  std::vector<Parameter*> params{&p};
  NadamState state(params);
  for (int step = 0; step < 10; ++step) nadam_step(params, state, 0.5, 0.1);
  CHECK(p.value[0] == 2.0);
  CHECK(state.m[0][0] == 0.0);
  CHECK(state.v[0][0] == 0.0);
}

TEST_CASE("weight decay couples into the gradient before the moments") {
  // With g = 0 and decay d, the effective gradient is d*w, so the first-step
  // moments must be the same as a plain step with that gradient.
  Parameter decayed("d", Tensor({1}, {2.0}));
  decayed.grad[0] = 0.0;
  std::vector<Parameter*> dp{&decayed};
  NadamState ds(dp);
  nadam_step(dp, ds, 0.1, 0.25);

  Parameter plain("p", Tensor({1}, {2.0}));
  plain.grad[0] = 0.25 * 2.0;
  std::vector<Parameter*> pp{&plain};
  NadamState ps(pp);
  nadam_step(pp, ps, 0.1, 0.0);

  CHECK(decayed.value[0] == plain.value[0]);
  CHECK(ds.m[0][0] == ps.m[0][0]);
  CHECK(ds.v[0][0] == ps.v[0][0]);
}

TEST_CASE("step counter advances once per call") {
  Parameter p("p", Tensor({1}, {1.0}));
  std::vector<Parameter*> params{&p};
  NadamState state(params);
  CHECK(state.t == 0);
  for (long step = 1; step <= 5; ++step) {
    p.grad[0] = 1.0;
    nadam_step(params, state, 0.01, 0.0);
    CHECK(state.t == step);
  }
}

TEST_CASE("10-step trajectory matches an independent scalar oracle") {
  Rng rng(99);
  Parameter p("p", Tensor({4}, {1.0, -2.0, 0.5, 3.0}));
  std::vector<Parameter*> params{&p};
  NadamState state(params);
  std::vector<ScalarNadam> oracle(4);
  std::vector<double> w{1.0, -2.0, 0.5, 3.0};
  const double lr = 0.05, decay = 2e-3;
  for (int step = 0; step < 10; ++step) {
    for (std::size_t i = 0; i < 4; ++i) p.grad[i] = rng.normal();
    for (std::size_t i = 0; i < 4; ++i) w[i] = oracle[i].step(w[i], p.grad[i], lr, decay);
    nadam_step(params, state, lr, decay);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(p.value[i] == doctest::Approx(w[i]).epsilon(1e-12));
    }
  }
}

}  // TEST_SUITE
