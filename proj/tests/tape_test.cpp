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
#include "vitiseg/errors.hpp"
#include "vitiseg/grad_check.hpp"
#include "vitiseg/rng.hpp"
#include "vitiseg/tape.hpp"

using namespace vitiseg;
using vitiseg::testing::random_tensor;

namespace {

Real max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  Real m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Independent six-nested-loop convolution, written straight from the output
// formula rather than the tape kernel.
Tensor conv_oracle(const Tensor& in, const Tensor& k, const Tensor& b, int stride, int pad) {
  const int n_count = in.dim(0), c_count = in.dim(1), h = in.dim(2), w = in.dim(3);
  const int o_count = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  Tensor out({n_count, o_count, oh, ow});
  for (int n = 0; n < n_count; ++n) {
    for (int o = 0; o < o_count; ++o) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          Real acc = b[static_cast<std::size_t>(o)];
          for (int c = 0; c < c_count; ++c) {
            for (int dy = 0; dy < kh; ++dy) {
              for (int dx = 0; dx < kw; ++dx) {
                const int iy = y * stride + dy - pad;
                const int ix = x * stride + dx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += in.at(n, c, iy, ix) * k.at(o, c, dy, dx);
              }
            }
          }
          out.at(n, o, y, x) = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("tape") {

TEST_CASE("conv2d with a 1x1 doubling kernel scales the input") {
  Tape tape;
  Parameter w("w", Tensor({1, 1, 1, 1}, {2.0}));
  Parameter b("b", Tensor::zeros({1}));
  Var y = tape.conv2d(tape.input(Tensor::full({1, 1, 3, 3}, 1.0)), tape.param(w),
                      tape.param(b), 1, 0);
  CHECK(y.shape() == std::vector<int>{1, 1, 3, 3});
  for (std::size_t i = 0; i < y.value().size(); ++i) CHECK(y.value()[i] == 2.0);
}

TEST_CASE("conv2d shape follows floor((H + 2p - k)/s) + 1") {
  Tape tape;
  Parameter w("w", Tensor::zeros({1, 1, 2, 2}));
  Parameter b("b", Tensor::zeros({1}));
  Var y = tape.conv2d(tape.input(Tensor::zeros({1, 1, 4, 4})), tape.param(w), tape.param(b),
                      2, 0);
  CHECK(y.shape() == std::vector<int>{1, 1, 2, 2});
  Tape t2;
  Var y2 = t2.conv2d(t2.input(Tensor::zeros({1, 1, 5, 7})), t2.param(w), t2.param(b), 2, 1);
  CHECK(y2.shape() == std::vector<int>{1, 1, 3, 4});
}

TEST_CASE("conv2d matches the naive loop oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor in = random_tensor({1, 2, 5, 5}, rng);
    Tensor k = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    for (const auto& [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 0}, {2, 1}}) {
      Tape tape;
      Parameter wp("w", k), bp("b", b);
      Var y = tape.conv2d(tape.input(in), tape.param(wp), tape.param(bp), stride, pad);
      CHECK(max_abs_diff(y.value(), conv_oracle(in, k, b, stride, pad)) < 1e-12);
    }
  }
}

TEST_CASE("conv2d rejects mismatched channel counts") {
  Tape tape;
  Parameter w("w", Tensor::zeros({1, 3, 3, 3}));
  Parameter b("b", Tensor::zeros({1}));
  CHECK_THROWS_AS(
      tape.conv2d(tape.input(Tensor::zeros({1, 2, 4, 4})), tape.param(w), tape.param(b), 1, 0),
      ConfigError);
}

TEST_CASE("maxpool2 picks the window maximum") {
  Tape tape;
  Var y = tape.maxpool2(tape.input(Tensor({1, 1, 2, 2}, {1, 2, 3, 4})));
  CHECK(y.value()[0] == 4.0);
}

TEST_CASE("maxpool2 ties route the gradient to the first scanned element") {
  Tape tape;
  Parameter p("p", Tensor::full({1, 1, 4, 4}, 7.0));
  Var y = tape.sum_all(tape.maxpool2(tape.param(p)));
  tape.backward(y);
  for (int iy = 0; iy < 4; ++iy) {
    for (int ix = 0; ix < 4; ++ix) {
      const Real expected = (iy % 2 == 0 && ix % 2 == 0) ? 1.0 : 0.0;
      CHECK(p.grad.at(0, 0, iy, ix) == expected);
    }
  }
}

TEST_CASE("maxpool2 matches a window-scan oracle") {
  Rng rng(11);
  Tensor in = random_tensor({1, 1, 6, 6}, rng);
  Tape tape;
  Var y = tape.maxpool2(tape.input(in));
  for (int oy = 0; oy < 3; ++oy) {
    for (int ox = 0; ox < 3; ++ox) {
      Real m = -1e300;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) m = std::max(m, in.at(0, 0, 2 * oy + dy, 2 * ox + dx));
      }
      CHECK(y.value().at(0, 0, oy, ox) == m);
    }
  }
}

TEST_CASE("maxpool2 rejects odd spatial dims") {
  Tape tape;
  CHECK_THROWS_AS(tape.maxpool2(tape.input(Tensor::zeros({1, 1, 3, 4}))), ConfigError);
}

TEST_CASE("upsample_nearest2 replicates pixels into 2x2 blocks") {
  Tape tape;
  Var y = tape.upsample_nearest2(tape.input(Tensor({1, 1, 1, 1}, {5.0})));
  CHECK(y.shape() == std::vector<int>{1, 1, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.value()[i] == 5.0);

  Rng rng(3);
  Tensor in = random_tensor({1, 3, 4, 4}, rng);
  Tape t2;
  Var up = t2.upsample_nearest2(t2.input(in));
  for (int c = 0; c < 3; ++c) {
    for (int iy = 0; iy < 8; ++iy) {
      for (int ix = 0; ix < 8; ++ix) {
        CHECK(up.value().at(0, c, iy, ix) == in.at(0, c, iy / 2, ix / 2));
      }
    }
  }
}

TEST_CASE("maxpool2 of upsample_nearest2 is the identity") {
  Rng rng(4);
  Tensor in = random_tensor({2, 2, 3, 3}, rng);
  Tape tape;
  Var y = tape.maxpool2(tape.upsample_nearest2(tape.input(in)));
  CHECK(max_abs_diff(y.value(), in) == 0.0);
}

TEST_CASE("concat_channels stacks along the channel axis") {
  Tape tape;
  Var y = tape.concat_channels(tape.input(Tensor::zeros({1, 2, 2, 2})),
                               tape.input(Tensor::zeros({1, 3, 2, 2})));
  CHECK(y.shape() == std::vector<int>{1, 5, 2, 2});
  CHECK_THROWS_AS(tape.concat_channels(tape.input(Tensor::zeros({1, 2, 2, 2})),
                                       tape.input(Tensor::zeros({1, 2, 4, 4}))),
                  ConfigError);
}

TEST_CASE("concat with zeros then slice recovers the input") {
  Rng rng(5);
  Tensor in = random_tensor({1, 3, 4, 4}, rng);
  Tape tape;
  Var y = tape.slice_channels(
      tape.concat_channels(tape.input(in), tape.input(Tensor::zeros({1, 2, 4, 4}))), 0, 3);
  CHECK(max_abs_diff(y.value(), in) == 0.0);
  CHECK_THROWS_AS(tape.slice_channels(tape.input(Tensor::zeros({1, 3, 4, 4})), 2, 4),
                  UsageError);
}

TEST_CASE("batch_norm normalizes and honors gamma/beta") {
  // Zero-mean unit-variance input passes through up to the epsilon in the
  // denominator (1e-5 shifts values by about 5e-6 of their magnitude).
  Tensor in({2, 1, 1, 2});
  in[0] = -1.0; in[1] = 1.0; in[2] = 1.0; in[3] = -1.0;
  Parameter gamma("g", Tensor::full({1}, 1.0));
  Parameter beta("b", Tensor::zeros({1}));
  BatchNormStats stats(1);
  Tape tape;
  Var y = tape.batch_norm(tape.input(in), tape.param(gamma), tape.param(beta), stats,
                          Mode::kTrain);
  CHECK(max_abs_diff(y.value(), in) < 2e-5);

  Parameter gamma0("g0", Tensor::zeros({1}));
  Parameter beta7("b7", Tensor::full({1}, 7.0));
  BatchNormStats stats2(1);
  Tape t2;
  Var y2 = t2.batch_norm(t2.input(in), t2.param(gamma0), t2.param(beta7), stats2,
                         Mode::kTrain);
  for (std::size_t i = 0; i < y2.value().size(); ++i) CHECK(y2.value()[i] == 7.0);
}

TEST_CASE("batch_norm train output has zero mean and unit variance per channel") {
  Rng rng(9);
  Tensor in = random_tensor({4, 3, 5, 5}, rng, -3.0, 5.0);
  Parameter gamma("g", Tensor::full({3}, 1.0));
  Parameter beta("b", Tensor::zeros({3}));
  BatchNormStats stats(3);
  Tape tape;
  Var y = tape.batch_norm(tape.input(in), tape.param(gamma), tape.param(beta), stats,
                          Mode::kTrain);
  const int per_channel = 4 * 5 * 5;
  for (int c = 0; c < 3; ++c) {
    Real sum = 0.0, sq = 0.0;
    for (int n = 0; n < 4; ++n) {
      for (int iy = 0; iy < 5; ++iy) {
        for (int ix = 0; ix < 5; ++ix) {
          const Real v = y.value().at(n, c, iy, ix);
          sum += v;
          sq += v * v;
        }
      }
    }
    const Real mean = sum / per_channel;
    const Real var = sq / per_channel - mean * mean;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 2e-5);
  }
}

TEST_CASE("batch_norm updates running stats with momentum 0.9 and uses them in eval") {
  Tensor in({2, 1, 1, 1});
  in[0] = 2.0;
  in[1] = 6.0;  // batch mean 4, population variance 4
  Parameter gamma("g", Tensor::full({1}, 1.0));
  Parameter beta("b", Tensor::zeros({1}));
  BatchNormStats stats(1);
  {
    Tape tape;
    tape.batch_norm(tape.input(in), tape.param(gamma), tape.param(beta), stats, Mode::kTrain);
  }
  CHECK(stats.mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 4.0).epsilon(1e-12));
  CHECK(stats.var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 4.0).epsilon(1e-12));

  Tensor probe({1, 1, 1, 1});
  probe[0] = 1.0;
  Tape tape;
  Var y = tape.batch_norm(tape.input(probe), tape.param(gamma), tape.param(beta), stats,
                          Mode::kEval);
  const Real expected = (1.0 - stats.mean[0]) / std::sqrt(stats.var[0] + 1e-5);
  CHECK(y.value()[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("batch_norm rejects a train-mode batch of one") {
  Parameter gamma("g", Tensor::full({1}, 1.0));
  Parameter beta("b", Tensor::zeros({1}));
  BatchNormStats stats(1);
  Tape tape;
  CHECK_THROWS_AS(tape.batch_norm(tape.input(Tensor::zeros({1, 1, 2, 2})), tape.param(gamma),
                                  tape.param(beta), stats, Mode::kTrain),
                  ConfigError);
}

TEST_CASE("elu value contract") {
  Tape tape;
  Tensor in({3});
  in[0] = 0.0;
  in[1] = -50.0;
  in[2] = 2.5;
  Var y = tape.elu(tape.input(in));
  CHECK(y.value()[0] == 0.0);
  CHECK(std::abs(y.value()[1] - (-1.0)) < 1e-12);
  CHECK(y.value()[2] == 2.5);
}

TEST_CASE("elu gradient matches finite differences at fixed points") {
  Parameter p("p", Tensor({4}, {-2.0, -0.5, 0.3, 4.0}));
  const std::vector<Parameter*> params{&p};
  const Real err = grad_check(
      params,
      [&] {
        Tape tape;
        return tape.sum_all(tape.elu(tape.param(p))).value()[0];
      },
      [&] {
        Tape tape;
        tape.backward(tape.sum_all(tape.elu(tape.param(p))));
      });
  CHECK(err < 1e-6);
}

TEST_CASE("softmax_channels is a stable 2-class distribution") {
  Tape tape;
  Var equal = tape.softmax_channels(tape.input(Tensor::full({1, 2, 2, 2}, 3.0)));
  for (std::size_t i = 0; i < equal.value().size(); ++i) CHECK(equal.value()[i] == 0.5);

  Tensor hot({1, 2, 1, 1});
  hot[0] = 50.0;
  hot[1] = -50.0;
  Tape t2;
  Var sat = t2.softmax_channels(t2.input(hot));
  CHECK(std::abs(sat.value()[0] - 1.0) < 1e-12);
  CHECK(std::abs(sat.value()[1] - 0.0) < 1e-12);

  Rng rng(12);
  Tensor logits = random_tensor({2, 2, 3, 3}, rng, -5.0, 5.0);
  Tape t3;
  Var soft = t3.softmax_channels(t3.input(logits));
  for (int n = 0; n < 2; ++n) {
    for (int iy = 0; iy < 3; ++iy) {
      for (int ix = 0; ix < 3; ++ix) {
        const Real a = soft.value().at(n, 0, iy, ix);
        const Real b = soft.value().at(n, 1, iy, ix);
        CHECK(std::abs(a + b - 1.0) < 1e-9);
        const Real ea = std::exp(logits.at(n, 0, iy, ix));
        const Real eb = std::exp(logits.at(n, 1, iy, ix));
        CHECK(a == doctest::Approx(ea / (ea + eb)).epsilon(1e-12));
      }
    }
  }

  Tape t4;
  CHECK_THROWS_AS(t4.softmax_channels(t4.input(Tensor::zeros({1, 3, 2, 2}))), ConfigError);
}

TEST_CASE("dropout is inverted, seeded, and a true no-op when disabled") {
  Rng rng(77);
  Tensor in = Tensor::full({1, 1, 2, 2}, 3.0);

  Rng before(42), after(42);
  Tape tape;
  Var id = tape.dropout(tape.input(in), 0.0, before, Mode::kTrain);
  CHECK(max_abs_diff(id.value(), in) == 0.0);
  CHECK(before.next_u64() == after.next_u64());

  Tape t2;
  Var ev = t2.dropout(t2.input(in), 0.9, rng, Mode::kEval);
  CHECK(max_abs_diff(ev.value(), in) == 0.0);

  Tape t3;
  CHECK_THROWS_AS(t3.dropout(t3.input(in), 1.0, rng, Mode::kTrain), ConfigError);

  Rng a(7), b(7);
  Tape ta, tb;
  Var da = ta.dropout(ta.input(in), 0.5, a, Mode::kTrain);
  Var db = tb.dropout(tb.input(in), 0.5, b, Mode::kTrain);
  CHECK(max_abs_diff(da.value(), db.value()) == 0.0);
}

TEST_CASE("dropout at rate 0.5 zeroes half and doubles survivors") {
  const int n = 1000000;
  Tensor in = Tensor::full({1, 1, 1000, 1000}, 3.0);
  Rng rng(123);
  Tape tape;
  Var y = tape.dropout(tape.input(in), 0.5, rng, Mode::kTrain);
  std::size_t zeros = 0;
  Real sum = 0.0;
  for (std::size_t i = 0; i < y.value().size(); ++i) {
    const Real v = y.value()[i];
    if (v == 0.0) {
      ++zeros;
    } else {
      CHECK(v == 6.0);
    }
    sum += v;
  }
  const Real zero_frac = static_cast<Real>(zeros) / n;
  CHECK(std::abs(zero_frac - 0.5) < 0.002);
  CHECK(std::abs(sum / n - 3.0) < 0.005 * 3.0);
}

TEST_CASE("backward populates gradients and clears the tape") {
  Parameter p("p", Tensor({3}, {1.0, 2.0, 3.0}));
  {
    Tape tape;
    tape.backward(tape.sum_all(tape.param(p)));
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.grad[i] == 1.0);
  }
  {
    Parameter q("q", Tensor({1}, {3.0}));
    Tape tape;
    Var x = tape.param(q);
    tape.backward(tape.sum_all(tape.mul(x, x)));
    CHECK(q.grad[0] == 6.0);
  }
  {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(tape.param(p)), UsageError);
  }
}

TEST_CASE("frozen parameters receive zero gradients") {
  Parameter p("p", Tensor({2}, {1.0, 2.0}), false);
  Parameter q("q", Tensor({2}, {3.0, 4.0}));
  Tape tape;
  Var loss = tape.sum_all(tape.mul(tape.param(p), tape.param(q)));
  tape.backward(loss);
  CHECK(p.grad[0] == 0.0);
  CHECK(p.grad[1] == 0.0);
  CHECK(q.grad[0] == 1.0);
  CHECK(q.grad[1] == 2.0);
}

TEST_CASE("a parameter not reached by the loss gets a zero gradient") {
  Parameter used("used", Tensor({1}, {2.0}));
  Parameter unused("unused", Tensor({1}, {5.0}));
  unused.grad[0] = 99.0;
  Tape tape;
  Var u = tape.param(used);
  tape.param(unused);
  tape.backward(tape.sum_all(u));
  CHECK(used.grad[0] == 1.0);
  CHECK(unused.grad[0] == 0.0);
}

TEST_CASE("forward and backward are bit-deterministic") {
  auto run = [](Tensor& grad_out) {
    Rng rng(2024);
    Parameter w("w", random_tensor({2, 2, 3, 3}, rng));
    Parameter b("b", random_tensor({2}, rng));
    Tensor in = random_tensor({1, 2, 4, 4}, rng);
    Tape tape;
    Var y = tape.elu(tape.conv2d(tape.input(in), tape.param(w), tape.param(b), 1, 1));
    Var loss = tape.sum_all(y);
    const Real value = loss.value()[0];
    tape.backward(loss);
    grad_out = w.grad;
    return value;
  };
  Tensor g1, g2;
  const Real v1 = run(g1);
  const Real v2 = run(g2);
  CHECK(v1 == v2);
  CHECK(max_abs_diff(g1, g2) == 0.0);
}

TEST_CASE("ops stay finite for inputs up to magnitude 1e3") {
  Rng rng(31);
  Tensor big = random_tensor({2, 2, 4, 4}, rng, -1000.0, 1000.0);
  Tape tape;
  Var x = tape.input(big);
  CHECK(tape.elu(x).value().all_finite());
  CHECK(tape.sigmoid(x).value().all_finite());
  CHECK(tape.softmax_channels(x).value().all_finite());
  CHECK(tape.affine(x, 3.0, -2.0).value().all_finite());
  Parameter w("w", random_tensor({2, 2, 3, 3}, rng, -1000.0, 1000.0));
  Parameter b("b", random_tensor({2}, rng, -1000.0, 1000.0));
  CHECK(tape.conv2d(x, tape.param(w), tape.param(b), 1, 1).value().all_finite());
}

TEST_CASE("every differentiable op passes grad_check at 5 random inputs") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Parameter a("a", random_tensor({2, 4, 4, 4}, rng));
    Parameter b("b", random_tensor({2, 4, 4, 4}, rng));
    Parameter w("w", random_tensor({4, 4, 3, 3}, rng, -0.5, 0.5));
    Parameter wb("wb", random_tensor({4}, rng, -0.5, 0.5));
    Parameter gamma("gamma", random_tensor({4}, rng, 0.5, 1.5));
    Parameter beta("beta", random_tensor({4}, rng, -0.5, 0.5));
    Parameter gate("gate", random_tensor({2, 4, 1, 1}, rng));
    Parameter logits("logits", random_tensor({2, 2, 4, 4}, rng, -2.0, 2.0));
    BatchNormStats stats(4);

    struct Case {
      const char* name;
      std::vector<Parameter*> params;
      std::function<Var(Tape&)> build;
    };
    const std::vector<Case> cases = {
        {"add", {&a, &b}, [&](Tape& t) { return t.add(t.param(a), t.param(b)); }},
        {"mul", {&a, &b}, [&](Tape& t) { return t.mul(t.param(a), t.param(b)); }},
        {"affine", {&a}, [&](Tape& t) { return t.affine(t.param(a), 2.5, -1.0); }},
        {"elu", {&a}, [&](Tape& t) { return t.elu(t.param(a)); }},
        {"sigmoid", {&a}, [&](Tape& t) { return t.sigmoid(t.param(a)); }},
        {"conv_s1p1",
         {&a, &w, &wb},
         [&](Tape& t) { return t.conv2d(t.param(a), t.param(w), t.param(wb), 1, 1); }},
        {"conv_s2p0",
         {&a, &w, &wb},
         [&](Tape& t) { return t.conv2d(t.param(a), t.param(w), t.param(wb), 2, 0); }},
        {"maxpool2", {&a}, [&](Tape& t) { return t.maxpool2(t.param(a)); }},
        {"upsample", {&a}, [&](Tape& t) { return t.upsample_nearest2(t.param(a)); }},
        {"concat",
         {&a, &b},
         [&](Tape& t) { return t.concat_channels(t.param(a), t.param(b)); }},
        {"slice", {&a}, [&](Tape& t) { return t.slice_channels(t.param(a), 1, 2); }},
        {"batch_norm",
         {&a, &gamma, &beta},
         [&](Tape& t) {
           return t.batch_norm(t.param(a), t.param(gamma), t.param(beta), stats,
                               Mode::kTrain);
         }},
        {"softmax",
         {&logits},
         [&](Tape& t) { return t.softmax_channels(t.param(logits)); }},
        {"gap", {&a}, [&](Tape& t) { return t.global_avg_pool(t.param(a)); }},
        {"scale_channels",
         {&a, &gate},
         [&](Tape& t) { return t.scale_channels(t.param(a), t.param(gate)); }},
    };
    for (const Case& c : cases) {
      INFO(std::string(c.name), " seed ", seed);
      // Fixed nonuniform weights make the incoming adjoint vary per element
      // and keep the loss sensitive to mean/variance-invariant ops like
      // batch_norm, whose plain sum is constant by construction.
      auto loss = [&](Tape& t) {
        Var y = c.build(t);
        Tensor wts(y.shape());
        for (std::size_t i = 0; i < wts.size(); ++i) {
          wts[i] = 0.3 + 0.017 * static_cast<Real>(i % 11);
        }
        Var wy = t.mul(t.input(std::move(wts)), y);
        return t.sum_all(t.add(wy, t.mul(wy, t.affine(y, 0.25, 0.0))));
      };
      const Real err = grad_check(
          c.params,
          [&] {
            Tape t;
            return loss(t).value()[0];
          },
          [&] {
            Tape t;
            t.backward(loss(t));
          });
      CHECK(err < 1e-3);
    }
  }
}

TEST_CASE("grad_check is near-exact on a linear layer") {
  Rng rng(8);
  Parameter w("w", random_tensor({8}, rng));
  Parameter b("b", random_tensor({8}, rng));
  const Tensor x = random_tensor({8}, rng);
  const std::vector<Parameter*> params{&w, &b};
  const Real err = grad_check(
      params,
      [&] {
        Tape t;
        return t.sum_all(t.add(t.mul(t.param(w), t.input(x)), t.param(b))).value()[0];
      },
      [&] {
        Tape t;
        t.backward(t.sum_all(t.add(t.mul(t.param(w), t.input(x)), t.param(b))));
      });
  CHECK(err < 1e-9);
}

TEST_CASE("grad_check accepts a conv-elu-pool stack") {
  Rng rng(21);
  Parameter w("w", random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5));
  Parameter b("b", random_tensor({3}, rng, -0.5, 0.5));
  const Tensor x = random_tensor({1, 2, 6, 6}, rng);
  const std::vector<Parameter*> params{&w, &b};
  auto loss = [&](Tape& t) {
    return t.sum_all(t.maxpool2(t.elu(t.conv2d(t.input(x), t.param(w), t.param(b), 1, 1))));
  };
  const Real err = grad_check(
      params,
      [&] {
        Tape t;
        return loss(t).value()[0];
      },
      [&] {
        Tape t;
        t.backward(loss(t));
      });
  CHECK(err < 1e-3);
}

TEST_CASE("grad_check flags a corrupted adjoint") {
  Parameter p("p", Tensor({3}, {0.7, -1.2, 2.0}));
  const std::vector<Parameter*> params{&p};
  auto loss = [&](Tape& t) {
    Var x = t.param(p);
    Tensor squared = x.value();
    for (std::size_t i = 0; i < squared.size(); ++i) squared[i] *= squared[i];
    Var y = t.custom(
        "bad_square", std::move(squared), {x},
        [](const Tensor&, const Tensor& out_grad, std::span<const Tensor* const> in_values,
           std::span<Tensor* const> in_grads) {
          for (std::size_t i = 0; i < out_grad.size(); ++i) {
            (*in_grads[0])[i] += 3.0 * (*in_values[0])[i] * out_grad[i];
          }
        });
    return t.sum_all(y);
  };
  const Real err = grad_check(
      params,
      [&] {
        Tape t;
        return loss(t).value()[0];
      },
      [&] {
        Tape t;
        t.backward(loss(t));
      });
  CHECK(err > 1e-2);
}

}  // TEST_SUITE
