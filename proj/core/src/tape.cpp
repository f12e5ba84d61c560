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

#include "vitiseg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "vitiseg/errors.hpp"

namespace vitiseg {

const Tensor& Var::value() const { return tape->value_of(node); }
const std::vector<int>& Var::shape() const { return value().shape(); }

namespace {

void require_4d(const Tensor& t, const char* op) {
  if (t.ndim() != 4) {
    throw ConfigError(std::string(op) + ": expected NCHW tensor, got shape " + t.shape_str());
  }
}

// ceil(a / b) for b > 0, correct for negative a.
int ceil_div(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }

}  // namespace

void Tape::check_finite(const Tensor& t, const char* op, const char* what) const {
  if (!t.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite " + what);
  }
}

Var Tape::push(const char* name, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  check_finite(value, name, "output");
  Node nd;
  nd.value = std::move(value);
  nd.name = name;
  nd.backward = std::move(backward);
  nd.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape != this) throw UsageError(std::string(name) + ": input from a different tape");
    nd.inputs.push_back(v.node);
  }
  nodes_.push_back(std::move(nd));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_slot(int node) {
  Node& nd = nodes_[static_cast<std::size_t>(node)];
  if (!nd.grad_live) {
    nd.grad = Tensor::zeros(nd.value.shape());
    nd.grad_live = true;
  }
  return nd.grad;
}

Var Tape::input(Tensor value) {
  return push("input", std::move(value), {}, nullptr);
}

Var Tape::param(Parameter& p) {
  auto it = std::find_if(nodes_.begin(), nodes_.end(),
                         [&](const Node& n) { return n.bound == &p; });
  if (it != nodes_.end()) {
    return Var{this, static_cast<int>(it - nodes_.begin())};
  }
  Var v = push("param", p.value, {}, nullptr);
  nodes_.back().bound = &p;
  return v;
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    throw ConfigError("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return push("add", std::move(out), {a, b},
              [](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                 std::span<Tensor* const> in_grads) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                  (*in_grads[0])[i] += g[i];
                  (*in_grads[1])[i] += g[i];
                }
              });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    throw ConfigError("mul: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return push("mul", std::move(out), {a, b},
              [](const Tensor&, const Tensor& g, std::span<const Tensor* const> in,
                 std::span<Tensor* const> in_grads) {
                const Tensor& av = *in[0];
                const Tensor& bv = *in[1];
                for (std::size_t i = 0; i < g.size(); ++i) {
                  (*in_grads[0])[i] += g[i] * bv[i];
                  (*in_grads[1])[i] += g[i] * av[i];
                }
              });
}

Var Tape::affine(Var x, Real scale, Real shift) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * xv[i] + shift;
  return push("affine", std::move(out), {x},
              [scale](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                      std::span<Tensor* const> in_grads) {
                for (std::size_t i = 0; i < g.size(); ++i) (*in_grads[0])[i] += scale * g[i];
              });
}

Var Tape::elu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Real v = xv[i];
    out[i] = v > 0 ? v : std::expm1(v);
  }
  return push("elu", std::move(out), {x},
              [](const Tensor& y, const Tensor& g, std::span<const Tensor* const> in,
                 std::span<Tensor* const> in_grads) {
                const Tensor& xv = *in[0];
                for (std::size_t i = 0; i < g.size(); ++i) {
                  (*in_grads[0])[i] += g[i] * (xv[i] > 0 ? 1.0 : y[i] + 1.0);
                }
              });
}

Var Tape::sigmoid(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Real v = xv[i];
    if (v >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      Real e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return push("sigmoid", std::move(out), {x},
              [](const Tensor& y, const Tensor& g, std::span<const Tensor* const>,
                 std::span<Tensor* const> in_grads) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                  (*in_grads[0])[i] += g[i] * y[i] * (1.0 - y[i]);
                }
              });
}

Var Tape::conv2d(Var x, Var weight, Var bias, int stride, int padding) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require_4d(xv, "conv2d");
  require_4d(wv, "conv2d");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
  const int n_batch = xv.dim(0), c_in = xv.dim(1), h_in = xv.dim(2), w_in = xv.dim(3);
  const int c_out = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  if (wv.dim(1) != c_in) {
    throw ConfigError("conv2d: kernel expects " + std::to_string(wv.dim(1)) +
                      " input channels, got " + std::to_string(c_in));
  }
  if (bv.ndim() != 1 || bv.dim(0) != c_out) {
    throw ConfigError("conv2d: bias shape " + bv.shape_str() + " does not match " +
                      std::to_string(c_out) + " output channels");
  }
  const int h_out = (h_in + 2 * padding - kh) / stride + 1;
  const int w_out = (w_in + 2 * padding - kw) / stride + 1;
  if (h_in + 2 * padding < kh || w_in + 2 * padding < kw) {
    throw ConfigError("conv2d: kernel larger than padded input");
  }

  Tensor out({n_batch, c_out, h_out, w_out});
  for (int n = 0; n < n_batch; ++n) {
    for (int o = 0; o < c_out; ++o) {
      Real* out_plane = out.data() + out.idx(n, o, 0, 0);
      const Real b = bv[static_cast<std::size_t>(o)];
      for (int i = 0; i < h_out * w_out; ++i) out_plane[i] = b;
      for (int c = 0; c < c_in; ++c) {
        const Real* in_plane = xv.data() + xv.idx(n, c, 0, 0);
        for (int i = 0; i < kh; ++i) {
          for (int j = 0; j < kw; ++j) {
            const Real wgt = wv.at(o, c, i, j);
            if (wgt == 0.0) continue;
            const int ow_lo = std::max(0, ceil_div(padding - j, stride));
            const int ow_hi = std::min(w_out, (w_in - 1 + padding - j) / stride + 1);
            for (int oh = 0; oh < h_out; ++oh) {
              const int ih = oh * stride - padding + i;
              if (ih < 0 || ih >= h_in) continue;
              const Real* in_row = in_plane + static_cast<std::size_t>(ih) * w_in - padding + j;
              Real* out_row = out_plane + static_cast<std::size_t>(oh) * w_out;
              if (stride == 1) {
                for (int ow = ow_lo; ow < ow_hi; ++ow) out_row[ow] += wgt * in_row[ow];
              } else {
                for (int ow = ow_lo; ow < ow_hi; ++ow) {
                  out_row[ow] += wgt * in_row[static_cast<std::size_t>(ow) * stride];
                }
              }
            }
          }
        }
      }
    }
  }

  auto backward = [stride, padding](const Tensor&, const Tensor& g,
                                    std::span<const Tensor* const> in,
                                    std::span<Tensor* const> in_grads) {
    const Tensor& xv = *in[0];
    const Tensor& wv = *in[1];
    Tensor& dx = *in_grads[0];
    Tensor& dw = *in_grads[1];
    Tensor& db = *in_grads[2];
    const int n_batch = xv.dim(0), c_in = xv.dim(1), h_in = xv.dim(2), w_in = xv.dim(3);
    const int c_out = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    const int h_out = g.dim(2), w_out = g.dim(3);
    for (int n = 0; n < n_batch; ++n) {
      for (int o = 0; o < c_out; ++o) {
        const Real* g_plane = g.data() + g.idx(n, o, 0, 0);
        Real bsum = 0.0;
        for (int i = 0; i < h_out * w_out; ++i) bsum += g_plane[i];
        db[static_cast<std::size_t>(o)] += bsum;
        for (int c = 0; c < c_in; ++c) {
          const Real* in_plane = xv.data() + xv.idx(n, c, 0, 0);
          Real* dx_plane = dx.data() + dx.idx(n, c, 0, 0);
          for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
              const Real wgt = wv.at(o, c, i, j);
              Real dwgt = 0.0;
              const int ow_lo = std::max(0, ceil_div(padding - j, stride));
              const int ow_hi = std::min(w_out, (w_in - 1 + padding - j) / stride + 1);
              for (int oh = 0; oh < h_out; ++oh) {
                const int ih = oh * stride - padding + i;
                if (ih < 0 || ih >= h_in) continue;
                const std::size_t row = static_cast<std::size_t>(ih) * w_in - padding + j;
                const Real* in_row = in_plane + row;
                Real* dx_row = dx_plane + row;
                const Real* g_row = g_plane + static_cast<std::size_t>(oh) * w_out;
                if (stride == 1) {
                  for (int ow = ow_lo; ow < ow_hi; ++ow) {
                    dx_row[ow] += wgt * g_row[ow];
                    dwgt += in_row[ow] * g_row[ow];
                  }
                } else {
                  for (int ow = ow_lo; ow < ow_hi; ++ow) {
                    const std::size_t iw = static_cast<std::size_t>(ow) * stride;
                    dx_row[iw] += wgt * g_row[ow];
                    dwgt += in_row[iw] * g_row[ow];
                  }
                }
              }
              dw.at(o, c, i, j) += dwgt;
            }
          }
        }
      }
    }
  };
  return push("conv2d", std::move(out), {x, weight, bias}, std::move(backward));
}

Var Tape::maxpool2(Var x) {
  const Tensor& xv = x.value();
  require_4d(xv, "maxpool2");
  const int n_batch = xv.dim(0), c_in = xv.dim(1), h_in = xv.dim(2), w_in = xv.dim(3);
  if (h_in % 2 != 0 || w_in % 2 != 0) {
    throw ConfigError("maxpool2: spatial dims must be even, got " + xv.shape_str());
  }
  const int h_out = h_in / 2, w_out = w_in / 2;
  Tensor out({n_batch, c_in, h_out, w_out});
  // Argmax per window; ties go to the first element in row-major scan order.
  std::vector<std::size_t> arg(out.size());
  std::size_t k = 0;
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < c_in; ++c) {
      for (int oh = 0; oh < h_out; ++oh) {
        for (int ow = 0; ow < w_out; ++ow, ++k) {
          std::size_t best_idx = xv.idx(n, c, 2 * oh, 2 * ow);
          Real best = xv[best_idx];
          for (int dh = 0; dh < 2; ++dh) {
            for (int dw = 0; dw < 2; ++dw) {
              const std::size_t idx = xv.idx(n, c, 2 * oh + dh, 2 * ow + dw);
              if (xv[idx] > best) {
                best = xv[idx];
                best_idx = idx;
              }
            }
          }
          out[k] = best;
          arg[k] = best_idx;
        }
      }
    }
  }
  return push("maxpool2", std::move(out), {x},
              [arg = std::move(arg)](const Tensor&, const Tensor& g,
                                     std::span<const Tensor* const>,
                                     std::span<Tensor* const> in_grads) {
                Tensor& dx = *in_grads[0];
                for (std::size_t i = 0; i < g.size(); ++i) dx[arg[i]] += g[i];
              });
}

Var Tape::upsample_nearest2(Var x) {
  const Tensor& xv = x.value();
  require_4d(xv, "upsample_nearest2");
  const int n_batch = xv.dim(0), c_in = xv.dim(1), h_in = xv.dim(2), w_in = xv.dim(3);
  Tensor out({n_batch, c_in, 2 * h_in, 2 * w_in});
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < c_in; ++c) {
      for (int h = 0; h < h_in; ++h) {
        const Real* in_row = xv.data() + xv.idx(n, c, h, 0);
        Real* r0 = out.data() + out.idx(n, c, 2 * h, 0);
        Real* r1 = out.data() + out.idx(n, c, 2 * h + 1, 0);
        for (int w = 0; w < w_in; ++w) {
          const Real v = in_row[w];
          r0[2 * w] = v;
          r0[2 * w + 1] = v;
          r1[2 * w] = v;
          r1[2 * w + 1] = v;
        }
      }
    }
  }
  return push("upsample_nearest2", std::move(out), {x},
              [](const Tensor&, const Tensor& g, std::span<const Tensor* const> in,
                 std::span<Tensor* const> in_grads) {
                const Tensor& xv = *in[0];
                Tensor& dx = *in_grads[0];
                const int n_batch = xv.dim(0), c_in = xv.dim(1);
                const int h_in = xv.dim(2), w_in = xv.dim(3);
                for (int n = 0; n < n_batch; ++n) {
                  for (int c = 0; c < c_in; ++c) {
                    for (int h = 0; h < h_in; ++h) {
                      const Real* r0 = g.data() + g.idx(n, c, 2 * h, 0);
                      const Real* r1 = g.data() + g.idx(n, c, 2 * h + 1, 0);
                      Real* dx_row = dx.data() + dx.idx(n, c, h, 0);
                      for (int w = 0; w < w_in; ++w) {
                        dx_row[w] += r0[2 * w] + r0[2 * w + 1] + r1[2 * w] + r1[2 * w + 1];
                      }
                    }
                  }
                }
              });
}

Var Tape::concat_channels(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_4d(av, "concat_channels");
  require_4d(bv, "concat_channels");
  // No implicit cropping: spatial dims must already agree.
  if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3)) {
    throw ConfigError("concat_channels: mismatched dims " + av.shape_str() + " vs " +
                      bv.shape_str());
  }
  const int n_batch = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  const int h = av.dim(2), w = av.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({n_batch, ca + cb, h, w});
  for (int n = 0; n < n_batch; ++n) {
    std::memcpy(out.data() + out.idx(n, 0, 0, 0), av.data() + av.idx(n, 0, 0, 0),
                plane * ca * sizeof(Real));
    std::memcpy(out.data() + out.idx(n, ca, 0, 0), bv.data() + bv.idx(n, 0, 0, 0),
                plane * cb * sizeof(Real));
  }
  return push("concat_channels", std::move(out), {a, b},
              [ca, cb, plane](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                              std::span<Tensor* const> in_grads) {
                Tensor& da = *in_grads[0];
                Tensor& db = *in_grads[1];
                const int n_batch = g.dim(0);
                for (int n = 0; n < n_batch; ++n) {
                  const Real* ga = g.data() + g.idx(n, 0, 0, 0);
                  const Real* gb = g.data() + g.idx(n, ca, 0, 0);
                  Real* pa = da.data() + da.idx(n, 0, 0, 0);
                  Real* pb = db.data() + db.idx(n, 0, 0, 0);
                  for (std::size_t i = 0; i < plane * ca; ++i) pa[i] += ga[i];
                  for (std::size_t i = 0; i < plane * cb; ++i) pb[i] += gb[i];
                }
              });
}

Var Tape::slice_channels(Var x, int begin, int count) {
  const Tensor& xv = x.value();
  require_4d(xv, "slice_channels");
  const int c_in = xv.dim(1);
  if (begin < 0 || count < 1 || begin + count > c_in) {
    throw UsageError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + std::to_string(c_in) +
                     " channels");
  }
  const int n_batch = xv.dim(0), h = xv.dim(2), w = xv.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({n_batch, count, h, w});
  for (int n = 0; n < n_batch; ++n) {
    std::memcpy(out.data() + out.idx(n, 0, 0, 0), xv.data() + xv.idx(n, begin, 0, 0),
                plane * count * sizeof(Real));
  }
  return push("slice_channels", std::move(out), {x},
              [begin, count, plane](const Tensor&, const Tensor& g,
                                    std::span<const Tensor* const>,
                                    std::span<Tensor* const> in_grads) {
                Tensor& dx = *in_grads[0];
                const int n_batch = g.dim(0);
                for (int n = 0; n < n_batch; ++n) {
                  const Real* gp = g.data() + g.idx(n, 0, 0, 0);
                  Real* dp = dx.data() + dx.idx(n, begin, 0, 0);
                  for (std::size_t i = 0; i < plane * count; ++i) dp[i] += gp[i];
                }
              });
}

Var Tape::batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode) {
  constexpr Real kEps = 1e-5;
  const Tensor& xv = x.value();
  require_4d(xv, "batch_norm");
  const int n_batch = xv.dim(0), c_in = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  if (gv.ndim() != 1 || gv.dim(0) != c_in || bv.ndim() != 1 || bv.dim(0) != c_in) {
    throw ConfigError("batch_norm: gamma/beta must have shape [" + std::to_string(c_in) + "]");
  }
  if (stats.mean.size() != static_cast<std::size_t>(c_in)) {
    throw ConfigError("batch_norm: running stats channel count mismatch");
  }
  if (mode == Mode::kTrain && n_batch < 2) {
    throw ConfigError("batch_norm: train mode requires batch size >= 2");
  }

  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const Real m = static_cast<Real>(n_batch) * static_cast<Real>(plane);
  Tensor mean({c_in});
  Tensor invstd({c_in});
  if (mode == Mode::kTrain) {
    for (int c = 0; c < c_in; ++c) {
      Real sum = 0.0;
      for (int n = 0; n < n_batch; ++n) {
        const Real* p = xv.data() + xv.idx(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      const Real mu = sum / m;
      Real sq = 0.0;
      for (int n = 0; n < n_batch; ++n) {
        const Real* p = xv.data() + xv.idx(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) {
          const Real d = p[i] - mu;
          sq += d * d;
        }
      }
      const Real var = sq / m;
      mean[static_cast<std::size_t>(c)] = mu;
      invstd[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var + kEps);
      stats.mean[static_cast<std::size_t>(c)] =
          stats.momentum * stats.mean[static_cast<std::size_t>(c)] + (1.0 - stats.momentum) * mu;
      stats.var[static_cast<std::size_t>(c)] =
          stats.momentum * stats.var[static_cast<std::size_t>(c)] + (1.0 - stats.momentum) * var;
    }
  } else {
    for (int c = 0; c < c_in; ++c) {
      mean[static_cast<std::size_t>(c)] = stats.mean[static_cast<std::size_t>(c)];
      invstd[static_cast<std::size_t>(c)] =
          1.0 / std::sqrt(stats.var[static_cast<std::size_t>(c)] + kEps);
    }
  }

  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < c_in; ++c) {
      const Real mu = mean[static_cast<std::size_t>(c)];
      const Real is = invstd[static_cast<std::size_t>(c)];
      const Real ga = gv[static_cast<std::size_t>(c)];
      const Real be = bv[static_cast<std::size_t>(c)];
      const Real* p = xv.data() + xv.idx(n, c, 0, 0);
      Real* ph = xhat.data() + xhat.idx(n, c, 0, 0);
      Real* po = out.data() + out.idx(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        const Real xh = (p[i] - mu) * is;
        ph[i] = xh;
        po[i] = ga * xh + be;
      }
    }
  }

  const bool train = mode == Mode::kTrain;
  auto backward = [xhat = std::move(xhat), invstd = std::move(invstd), train, m](
                      const Tensor&, const Tensor& g, std::span<const Tensor* const> in,
                      std::span<Tensor* const> in_grads) {
    const Tensor& gv = *in[1];
    Tensor& dx = *in_grads[0];
    Tensor& dgamma = *in_grads[1];
    Tensor& dbeta = *in_grads[2];
    const int n_batch = g.dim(0), c_in = g.dim(1);
    const std::size_t plane = static_cast<std::size_t>(g.dim(2)) * g.dim(3);
    for (int c = 0; c < c_in; ++c) {
      const Real ga = gv[static_cast<std::size_t>(c)];
      const Real is = invstd[static_cast<std::size_t>(c)];
      Real sum_g = 0.0, sum_gx = 0.0;
      for (int n = 0; n < n_batch; ++n) {
        const Real* gp = g.data() + g.idx(n, c, 0, 0);
        const Real* hp = xhat.data() + xhat.idx(n, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i) {
          sum_g += gp[i];
          sum_gx += gp[i] * hp[i];
        }
      }
      dbeta[static_cast<std::size_t>(c)] += sum_g;
      dgamma[static_cast<std::size_t>(c)] += sum_gx;
      if (train) {
        const Real k1 = ga * is;
        const Real mean_g = sum_g / m;
        const Real mean_gx = sum_gx / m;
        for (int n = 0; n < n_batch; ++n) {
          const Real* gp = g.data() + g.idx(n, c, 0, 0);
          const Real* hp = xhat.data() + xhat.idx(n, c, 0, 0);
          Real* dp = dx.data() + dx.idx(n, c, 0, 0);
          for (std::size_t i = 0; i < plane; ++i) {
            dp[i] += k1 * (gp[i] - mean_g - hp[i] * mean_gx);
          }
        }
      } else {
        const Real k1 = ga * is;
        for (int n = 0; n < n_batch; ++n) {
          const Real* gp = g.data() + g.idx(n, c, 0, 0);
          Real* dp = dx.data() + dx.idx(n, c, 0, 0);
          for (std::size_t i = 0; i < plane; ++i) dp[i] += k1 * gp[i];
        }
      }
    }
  };
  return push("batch_norm", std::move(out), {x, gamma, beta}, std::move(backward));
}

Var Tape::softmax_channels(Var x) {
  const Tensor& xv = x.value();
  require_4d(xv, "softmax_channels");
  if (xv.dim(1) != 2) {
    throw ConfigError("softmax_channels: expected exactly 2 channels, got " +
                      std::to_string(xv.dim(1)));
  }
  const int n_batch = xv.dim(0), h = xv.dim(2), w = xv.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out(xv.shape());
  for (int n = 0; n < n_batch; ++n) {
    const Real* a = xv.data() + xv.idx(n, 0, 0, 0);
    const Real* b = xv.data() + xv.idx(n, 1, 0, 0);
    Real* ya = out.data() + out.idx(n, 0, 0, 0);
    Real* yb = out.data() + out.idx(n, 1, 0, 0);
    for (std::size_t i = 0; i < plane; ++i) {
      const Real mx = std::max(a[i], b[i]);
      const Real ea = std::exp(a[i] - mx);
      const Real eb = std::exp(b[i] - mx);
      const Real s = ea + eb;
      ya[i] = ea / s;
      yb[i] = eb / s;
    }
  }
  return push("softmax_channels", std::move(out), {x},
              [](const Tensor& y, const Tensor& g, std::span<const Tensor* const>,
                 std::span<Tensor* const> in_grads) {
                Tensor& dx = *in_grads[0];
                const int n_batch = y.dim(0);
                const std::size_t plane = static_cast<std::size_t>(y.dim(2)) * y.dim(3);
                for (int n = 0; n < n_batch; ++n) {
                  const Real* ya = y.data() + y.idx(n, 0, 0, 0);
                  const Real* yb = y.data() + y.idx(n, 1, 0, 0);
                  const Real* ga = g.data() + g.idx(n, 0, 0, 0);
                  const Real* gb = g.data() + g.idx(n, 1, 0, 0);
                  Real* da = dx.data() + dx.idx(n, 0, 0, 0);
                  Real* db = dx.data() + dx.idx(n, 1, 0, 0);
                  for (std::size_t i = 0; i < plane; ++i) {
                    const Real dot = ga[i] * ya[i] + gb[i] * yb[i];
                    da[i] += ya[i] * (ga[i] - dot);
                    db[i] += yb[i] * (gb[i] - dot);
                  }
                }
              });
}

Var Tape::dropout(Var x, Real rate, Rng& rng, Mode mode) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  const Tensor& xv = x.value();
  if (mode == Mode::kEval || rate == 0.0) {
    // Identity; consumes no randomness so disabled dropout leaves the
    // stream untouched.
    return push("dropout", xv, {x},
                [](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                   std::span<Tensor* const> in_grads) {
                  for (std::size_t i = 0; i < g.size(); ++i) (*in_grads[0])[i] += g[i];
                });
  }
  const Real scale = 1.0 / (1.0 - rate);
  Tensor mask(xv.shape());
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const Real keep = rng.uniform() >= rate ? scale : 0.0;
    mask[i] = keep;
    out[i] = xv[i] * keep;
  }
  return push("dropout", std::move(out), {x},
              [mask = std::move(mask)](const Tensor&, const Tensor& g,
                                       std::span<const Tensor* const>,
                                       std::span<Tensor* const> in_grads) {
                for (std::size_t i = 0; i < g.size(); ++i) (*in_grads[0])[i] += g[i] * mask[i];
              });
}

Var Tape::global_avg_pool(Var x) {
  const Tensor& xv = x.value();
  require_4d(xv, "global_avg_pool");
  const int n_batch = xv.dim(0), c_in = xv.dim(1);
  const std::size_t plane = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
  Tensor out({n_batch, c_in, 1, 1});
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < c_in; ++c) {
      const Real* p = xv.data() + xv.idx(n, c, 0, 0);
      Real sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      out.at(n, c, 0, 0) = sum / static_cast<Real>(plane);
    }
  }
  return push("global_avg_pool", std::move(out), {x},
              [plane](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                      std::span<Tensor* const> in_grads) {
                Tensor& dx = *in_grads[0];
                const int n_batch = dx.dim(0), c_in = dx.dim(1);
                const Real inv = 1.0 / static_cast<Real>(plane);
                for (int n = 0; n < n_batch; ++n) {
                  for (int c = 0; c < c_in; ++c) {
                    const Real gv = g.at(n, c, 0, 0) * inv;
                    Real* dp = dx.data() + dx.idx(n, c, 0, 0);
                    for (std::size_t i = 0; i < plane; ++i) dp[i] += gv;
                  }
                }
              });
}

Var Tape::scale_channels(Var x, Var gate) {
  const Tensor& xv = x.value();
  const Tensor& gv = gate.value();
  require_4d(xv, "scale_channels");
  require_4d(gv, "scale_channels");
  if (gv.dim(0) != xv.dim(0) || gv.dim(1) != xv.dim(1) || gv.dim(2) != 1 || gv.dim(3) != 1) {
    throw ConfigError("scale_channels: gate must be Nx" + std::to_string(xv.dim(1)) +
                      "x1x1, got " + gv.shape_str());
  }
  const int n_batch = xv.dim(0), c_in = xv.dim(1);
  const std::size_t plane = static_cast<std::size_t>(xv.dim(2)) * xv.dim(3);
  Tensor out(xv.shape());
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < c_in; ++c) {
      const Real s = gv.at(n, c, 0, 0);
      const Real* p = xv.data() + xv.idx(n, c, 0, 0);
      Real* po = out.data() + out.idx(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) po[i] = p[i] * s;
    }
  }
  return push("scale_channels", std::move(out), {x, gate},
              [plane](const Tensor&, const Tensor& g, std::span<const Tensor* const> in,
                      std::span<Tensor* const> in_grads) {
                const Tensor& xv = *in[0];
                const Tensor& gv = *in[1];
                Tensor& dx = *in_grads[0];
                Tensor& dgate = *in_grads[1];
                const int n_batch = xv.dim(0), c_in = xv.dim(1);
                for (int n = 0; n < n_batch; ++n) {
                  for (int c = 0; c < c_in; ++c) {
                    const Real s = gv.at(n, c, 0, 0);
                    const Real* gp = g.data() + g.idx(n, c, 0, 0);
                    const Real* xp = xv.data() + xv.idx(n, c, 0, 0);
                    Real* dp = dx.data() + dx.idx(n, c, 0, 0);
                    Real acc = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) {
                      dp[i] += gp[i] * s;
                      acc += gp[i] * xp[i];
                    }
                    dgate.at(n, c, 0, 0) += acc;
                  }
                }
              });
}

Var Tape::sum_all(Var x) {
  const Tensor& xv = x.value();
  Real sum = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) sum += xv[i];
  return push("sum_all", Tensor::scalar(sum), {x},
              [](const Tensor&, const Tensor& g, std::span<const Tensor* const>,
                 std::span<Tensor* const> in_grads) {
                Tensor& dx = *in_grads[0];
                for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[0];
              });
}

Var Tape::custom(const char* name, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  return push(name, std::move(value), std::move(inputs), std::move(backward));
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.node < 0 ||
      loss.node >= static_cast<int>(nodes_.size())) {
    throw UsageError("backward: loss is not a node of this tape");
  }
  if (nodes_[static_cast<std::size_t>(loss.node)].value.size() != 1) {
    throw UsageError("backward: loss must be scalar, got shape " +
                     nodes_[static_cast<std::size_t>(loss.node)].value.shape_str());
  }
  grad_slot(loss.node)[0] = 1.0;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (int i = loss.node; i >= 0; --i) {
    Node& nd = nodes_[static_cast<std::size_t>(i)];
    if (!nd.grad_live) continue;
    check_finite(nd.grad, nd.name, "gradient");
    if (nd.backward) {
      in_values.clear();
      in_grads.clear();
      for (int j : nd.inputs) {
        in_values.push_back(&nodes_[static_cast<std::size_t>(j)].value);
        in_grads.push_back(&grad_slot(j));
      }
      nd.backward(nd.value, nd.grad, in_values, in_grads);
    }
    if (nd.bound) {
      if (nd.bound->trainable) {
        nd.bound->grad = std::move(nd.grad);
      } else {
        nd.bound->grad = Tensor::zeros(nd.value.shape());
      }
    }
  }
  // Parameters that never received gradient still need fresh (zero) slots.
  for (const Node& nd : nodes_) {
    if (nd.bound && !nd.grad_live) {
      nd.bound->grad = Tensor::zeros(nd.value.shape());
    }
  }
  clear();
}

void Tape::clear() { nodes_.clear(); }

}  // namespace vitiseg
