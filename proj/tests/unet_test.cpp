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
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "test_util.hpp"
#include "vitiseg/errors.hpp"
#include "vitiseg/grad_check.hpp"
#include "vitiseg/metrics.hpp"
#include "vitiseg/model_io.hpp"
#include "vitiseg/rng.hpp"
#include "vitiseg/unet.hpp"

using namespace vitiseg;
using vitiseg::testing::TempDir;
using vitiseg::testing::random_tensor;

namespace {

const EncoderVariant kAllVariants[] = {
    EncoderVariant::kPlain,          EncoderVariant::kVggMini,
    EncoderVariant::kResnetMini,     EncoderVariant::kInceptionMini,
    EncoderVariant::kInceptionResnetMini, EncoderVariant::kSeMini,
};

UNetConfig desk_config(EncoderVariant v, int size) {
  UNetConfig cfg;
  cfg.input_size = size;
  cfg.variant = v;
  cfg.width_factor = 0.125;
  return cfg;
}

Tensor zscored_input(int n, int size, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x({n, 3, size, size});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  return x;
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("unet") {

TEST_CASE("variant names round-trip") {
  for (EncoderVariant v : kAllVariants) {
    CHECK(variant_from_string(to_string(v)) == v);
  }
  CHECK_THROWS_AS(variant_from_string("resnet_xl"), ConfigError);
}

TEST_CASE("every variant emits an Nx2xSxS probability field") {
  for (EncoderVariant v : kAllVariants) {
    for (int size : {32, 64}) {
      INFO(to_string(v), " at ", size);
      Rng rng(1);
      UNetModel model(desk_config(v, size), rng);
      Tensor out = model.forward_eval(zscored_input(1, size, 2));
      CHECK(out.shape() == std::vector<int>{1, 2, size, size});
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const Real sum = out.at(0, 0, y, x) + out.at(0, 1, y, x);
          CHECK(std::abs(sum - 1.0) < 1e-9);
          CHECK(out.at(0, 1, y, x) >= 0.0);
          CHECK(out.at(0, 1, y, x) <= 1.0);
        }
      }
    }
  }
}

TEST_CASE("skip connections sit at scales 1, 1/2, 1/4, 1/8") {
  Rng rng(3);
  UNetModel model(desk_config(EncoderVariant::kPlain, 64), rng);
  model.forward_eval(zscored_input(1, 64, 4));
  const auto& skips = model.last_skip_shapes();
  REQUIRE(skips.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(skips[static_cast<std::size_t>(i)][2] == 64 >> i);
    CHECK(skips[static_cast<std::size_t>(i)][3] == 64 >> i);
  }
}

TEST_CASE("initialization is seed-deterministic") {
  for (EncoderVariant v : {EncoderVariant::kPlain, EncoderVariant::kSeMini}) {
    Rng r1(42), r2(42), r3(43);
    UNetModel a(desk_config(v, 32), r1);
    UNetModel b(desk_config(v, 32), r2);
    UNetModel c(desk_config(v, 32), r3);
    auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_diff_seed43 = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i]->value.shape() == pb[i]->value.shape());
      for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
        CHECK(pa[i]->value[j] == pb[i]->value[j]);
        any_diff_seed43 = any_diff_seed43 || pa[i]->value[j] != pc[i]->value[j];
      }
    }
    CHECK(any_diff_seed43);
  }
}

TEST_CASE("the desk-scale PLAIN network has exactly 123766 parameters") {
  Rng rng(5);
  UNetModel model(desk_config(EncoderVariant::kPlain, 64), rng);
  // 3x3 conv-BN stacks, summed from the architecture table: encoder
  // 3-4-8-16-32, bottleneck 64, decoder on concatenated skips back down to 4,
  // then the 1x1 2-way head without norm.
  struct Layer {
    int c_in, c_out, k;
    bool bn;
  };
  const Layer layers[] = {
      {3, 4, 3, true},   {4, 4, 3, true},                     // enc1
      {4, 8, 3, true},   {8, 8, 3, true},                     // enc2
      {8, 16, 3, true},  {16, 16, 3, true},                   // enc3
      {16, 32, 3, true}, {32, 32, 3, true},                   // enc4
      {32, 64, 3, true}, {64, 64, 3, true},                   // bottleneck
      {96, 32, 3, true}, {32, 32, 3, true},                   // dec4 (64+32 in)
      {48, 16, 3, true}, {16, 16, 3, true},                   // dec3
      {24, 8, 3, true},  {8, 8, 3, true},                     // dec2
      {12, 4, 3, true},  {4, 4, 3, true},                     // dec1
      {4, 2, 1, false},                                       // head
  };
  std::size_t expected = 0;
  for (const Layer& l : layers) {
    expected += static_cast<std::size_t>(l.c_out) * l.c_in * l.k * l.k + l.c_out;
    if (l.bn) expected += 2 * static_cast<std::size_t>(l.c_out);
  }
  CHECK(expected == 123766);
  CHECK(model.parameter_count() == expected);
}

TEST_CASE("a freshly initialized model is not saturated") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    UNetModel model(desk_config(EncoderVariant::kPlain, 32), rng);
    Tensor out = model.forward_eval(zscored_input(1, 32, seed + 100));
    Real mean = 0.0;
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) mean += out.at(0, 1, y, x);
    }
    mean /= 32.0 * 32.0;
    CHECK(mean > 0.2);
    CHECK(mean < 0.8);
  }
}

TEST_CASE("eval forward is bit-deterministic") {
  Rng rng(7);
  UNetModel model(desk_config(EncoderVariant::kInceptionResnetMini, 32), rng);
  Tensor x = zscored_input(1, 32, 8);
  Tensor a = model.forward_eval(x);
  Tensor b = model.forward_eval(x);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("residual stages reduce to the shortcut when the branch is silenced") {
  Rng rng(9);
  Stage stage;
  stage.init("res", Stage::Kind::kResidual, 4, 4, 0, true, 4, rng);
  CHECK_FALSE(stage.has_projection);
  stage.convs[1].weight.value.fill(0.0);
  stage.convs[1].bias.value.fill(0.0);
  Tensor x = random_tensor({1, 4, 8, 8}, rng);
  Tape tape;
  Var y = stage.apply(tape, tape.input(x), Mode::kEval);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.value()[i] == x[i]);

  // Channel change brings in the 1x1 projection; silencing it as well
  // collapses the whole stage to zero.
  Stage wide;
  wide.init("res2", Stage::Kind::kResidual, 2, 6, 0, true, 4, rng);
  CHECK(wide.has_projection);
  wide.convs[1].weight.value.fill(0.0);
  wide.convs[1].bias.value.fill(0.0);
  wide.projection.weight.value.fill(0.0);
  wide.projection.bias.value.fill(0.0);
  Tensor x2 = random_tensor({1, 2, 8, 8}, rng);
  Tape t2;
  Var y2 = wide.apply(t2, t2.input(x2), Mode::kEval);
  CHECK(y2.shape() == std::vector<int>{1, 6, 8, 8});
  for (std::size_t i = 0; i < y2.value().size(); ++i) CHECK(y2.value()[i] == 0.0);
}

TEST_CASE("silenced residual branch passes gradients through the shortcut unchanged") {
  Rng rng(11);
  Stage stage;
  stage.init("res", Stage::Kind::kResidual, 3, 3, 0, true, 4, rng);
  stage.convs[1].weight.value.fill(0.0);
  stage.convs[1].bias.value.fill(0.0);
  Parameter x("x", random_tensor({1, 3, 8, 8}, rng));
  Tape tape;
  tape.backward(tape.sum_all(stage.apply(tape, tape.param(x), Mode::kEval)));
  for (std::size_t i = 0; i < x.grad.size(); ++i) CHECK(x.grad[i] == 1.0);
}

TEST_CASE("inception stages keep the requested width and feed every branch") {
  Rng rng(13);
  Stage stage;
  stage.init("inc", Stage::Kind::kInception, 6, 8, 0, true, 4, rng);
  Tensor x = random_tensor({1, 6, 8, 8}, rng);
  Tape tape;
  Var y = stage.apply(tape, tape.input(x), Mode::kEval);
  CHECK(y.shape() == std::vector<int>{1, 8, 8, 8});

  Stage bad;
  CHECK_THROWS_AS(bad.init("bad", Stage::Kind::kInception, 4, 6, 0, true, 4, rng),
                  ConfigError);

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng r(seed);
    Stage s;
    s.init("inc", Stage::Kind::kInception, 4, 8, 0, true, 4, r);
    Parameter in("in", random_tensor({2, 4, 8, 8}, r));
    std::vector<Parameter*> params;
    std::vector<std::pair<std::string, BatchNormStats*>> stats;
    s.collect(params, stats);
    Tape t;
    Var out = s.apply(t, t.param(in), Mode::kTrain);
    Tensor wts(out.shape());
    for (std::size_t i = 0; i < wts.size(); ++i) wts[i] = 0.1 + 0.013 * (i % 9);
    t.backward(t.sum_all(t.mul(out, t.input(std::move(wts)))));
    // Conv biases sit in front of batch norm's mean subtraction and carry no
    // gradient by construction; every kernel weight must, in every branch.
    for (Parameter* p : params) {
      if (p->name.find(".weight") == std::string::npos) continue;
      Real mag = 0.0;
      for (std::size_t i = 0; i < p->grad.size(); ++i) mag += std::abs(p->grad[i]);
      INFO(p->name, " seed ", seed);
      CHECK(mag > 0.0);
    }
  }
}

TEST_CASE("squeeze-excitation gates interpolate between body and zero") {
  Rng rng(17);
  Stage se;
  se.init("se", Stage::Kind::kSe, 4, 8, 0, true, 4, rng);
  Tensor x = random_tensor({1, 4, 8, 8}, rng);

  Stage body;
  body.kind = Stage::Kind::kDouble;
  body.convs = se.convs;

  se.se_excite.weight.value.fill(0.0);
  se.se_excite.bias.value.fill(50.0);
  Tape t1, t2;
  Var gated = se.apply(t1, t1.input(x), Mode::kEval);
  Var plain = body.apply(t2, t2.input(x), Mode::kEval);
  for (std::size_t i = 0; i < gated.value().size(); ++i) {
    CHECK(gated.value()[i] == doctest::Approx(plain.value()[i]).epsilon(1e-12));
  }

  se.se_excite.bias.value.fill(-50.0);
  Tape t3;
  Var closed = se.apply(t3, t3.input(x), Mode::kEval);
  for (std::size_t i = 0; i < closed.value().size(); ++i) {
    CHECK(std::abs(closed.value()[i]) < 1e-15);
  }
}

TEST_CASE("full models pass a sampled gradient check") {
  // One element per parameter, central differences at step 1e-4. Max-pooling
  // makes the loss piecewise smooth in the kernel weights: when the step
  // straddles an argmax flip the quotient measures a secant across the kink,
  // so those elements re-measure at step 1e-6 (the analytic value is the
  // h->0 limit either way; the smooth variants never need the refinement).
  for (EncoderVariant v : kAllVariants) {
    INFO(to_string(v));
    Rng rng(19);
    UNetConfig cfg = desk_config(v, 32);
    UNetModel model(cfg, rng);
    std::vector<Parameter*> params = model.parameters();
    Tensor x = zscored_input(2, 32, 20);
    Rng trng(21);
    Tensor target({2, 1, 32, 32});
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = trng.coin() ? 1.0 : 0.0;
    auto loss = [&](Tape& t) {
      Var out = model.forward(t, t.input(x), Mode::kTrain);
      return bce_ji_loss(t, t.slice_channels(out, 1, 1), target);
    };
    auto frag = [&] {
      Tape t;
      return loss(t).value()[0];
    };
    {
      Tape t;
      t.backward(loss(t));
    }
    Real max_err = 0.0;
    int refined = 0;
    for (Parameter* p : params) {
      const Real analytic = p->grad[0];
      auto fd_at = [&](Real h) {
        const Real keep = p->value[0];
        p->value[0] = keep + h;
        const Real fp = frag();
        p->value[0] = keep - h;
        const Real fm = frag();
        p->value[0] = keep;
        return (fp - fm) / (2.0 * h);
      };
      auto rel = [&](Real fd) {
        return std::abs(fd - analytic) /
               std::max({std::abs(fd), std::abs(analytic), Real(1e-8)});
      };
      Real err = rel(fd_at(1e-4));
      if (err >= 1e-3) {
        err = rel(fd_at(1e-6));
        ++refined;
      }
      max_err = std::max(max_err, err);
    }
    CHECK(max_err < 1e-3);
    const bool has_maxpool_in_branches =
        v == EncoderVariant::kInceptionMini || v == EncoderVariant::kInceptionResnetMini;
    if (!has_maxpool_in_branches) CHECK(refined == 0);
  }
}

TEST_CASE("models deep-copy") {
  Rng rng(23);
  UNetModel a(desk_config(EncoderVariant::kPlain, 32), rng);
  UNetModel b = a;
  Tensor x = zscored_input(1, 32, 24);
  Tensor before = a.forward_eval(x);
  for (Parameter* p : b.parameters()) p->value.fill(0.0);
  Tensor after = a.forward_eval(x);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("save/load round-trips bit-exactly including batch-norm stats") {
  TempDir dir;
  Rng rng(29);
  UNetConfig cfg = desk_config(EncoderVariant::kResnetMini, 32);
  UNetModel model(cfg, rng);
  {
    // Drive the running stats away from their initial values.
    Tape tape;
    model.forward(tape, tape.input(zscored_input(2, 32, 30)), Mode::kTrain);
    tape.clear();
  }
  const std::string path = dir.file("model.vsgm");
  save_model(model, path);
  UNetModel back = load_model(path);
  CHECK(back.config() == cfg);

  auto pa = model.parameters(), pb = back.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    for (std::size_t j = 0; j < pa[i]->value.size(); ++j) {
      CHECK(pa[i]->value[j] == pb[i]->value[j]);
    }
  }
  auto sa = model.batch_norm_stats(), sb = back.batch_norm_stats();
  REQUIRE(sa.size() == sb.size());
  bool stats_moved = false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    for (std::size_t j = 0; j < sa[i].second->mean.size(); ++j) {
      CHECK(sa[i].second->mean[j] == sb[i].second->mean[j]);
      CHECK(sa[i].second->var[j] == sb[i].second->var[j]);
      stats_moved = stats_moved || sa[i].second->mean[j] != 0.0;
    }
  }
  CHECK(stats_moved);

  Tensor x = zscored_input(1, 32, 31);
  Tensor ya = model.forward_eval(x);
  Tensor yb = back.forward_eval(x);
  for (std::size_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == yb[i]);

  UNetModel checked = load_model(path, cfg);
  CHECK(checked.config() == cfg);
  UNetConfig other = cfg;
  other.variant = EncoderVariant::kPlain;
  CHECK_THROWS_AS(load_model(path, other), DataError);
}

TEST_CASE("model files reject corruption, truncation, and bad headers") {
  TempDir dir;
  Rng rng(37);
  UNetModel model(desk_config(EncoderVariant::kPlain, 32), rng);
  const std::string path = dir.file("model.vsgm");
  save_model(model, path);
  const std::vector<std::uint8_t> good = read_bytes(path);
  REQUIRE(good.size() > 64);

  std::vector<std::uint8_t> flipped = good;
  flipped[good.size() / 2] ^= 0x01;
  const std::string bad = dir.file("bad.vsgm");
  write_bytes(bad, flipped);
  CHECK_THROWS_AS(load_model(bad), DataError);

  std::vector<std::uint8_t> truncated(good.begin(), good.begin() + good.size() / 2);
  write_bytes(bad, truncated);
  CHECK_THROWS_AS(load_model(bad), DataError);

  std::vector<std::uint8_t> wrong_magic = good;
  wrong_magic[0] = 'X';
  write_bytes(bad, wrong_magic);
  CHECK_THROWS_AS(load_model(bad), DataError);

  std::vector<std::uint8_t> wrong_version = good;
  wrong_version[4] = 9;
  write_bytes(bad, wrong_version);
  CHECK_THROWS_AS(load_model(bad), DataError);

  CHECK_THROWS_AS(load_model(dir.file("absent.vsgm")), DataError);
}

TEST_CASE("forward validates its input shape") {
  Rng rng(41);
  UNetModel model(desk_config(EncoderVariant::kPlain, 32), rng);
  CHECK_THROWS_AS(model.forward_eval(Tensor::zeros({1, 3, 16, 16})), UsageError);
  CHECK_THROWS_AS(model.forward_eval(Tensor::zeros({1, 1, 32, 32})), UsageError);
  Tape tape;
  CHECK_THROWS_AS(model.forward(tape, tape.input(Tensor::zeros({1, 3, 64, 64})),
                                Mode::kTrain),
                  UsageError);
}

}  // TEST_SUITE
