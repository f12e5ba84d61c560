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

#ifndef VITISEG_TAPE_HPP_
#define VITISEG_TAPE_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vitiseg/rng.hpp"
#include "vitiseg/tensor.hpp"

namespace vitiseg {

enum class Mode { kTrain, kEval };

class Tape;

/// Handle to a node on a tape. Cheap to copy; invalid after the tape is
/// cleared or backward() has run.
struct Var {
  Tape* tape = nullptr;
  int node = -1;

  const Tensor& value() const;
  const std::vector<int>& shape() const;
};

/// Running statistics for one batch_norm site. Owned by the model, updated
/// in train mode, read in eval mode. Not part of the differentiated graph.
struct BatchNormStats {
  Tensor mean;      // shape [C], initialized to 0
  Tensor var;       // shape [C], initialized to 1
  Real momentum = 0.9;

  explicit BatchNormStats(int channels = 0)
      : mean(channels > 0 ? Tensor::zeros({channels}) : Tensor()),
        var(channels > 0 ? Tensor::full({channels}, 1.0) : Tensor()) {}
};

/// Reverse-mode differentiation tape. Records every executed operation in
/// order; backward() replays adjoints in exact reverse execution order.
///
/// Single-threaded per tape. Every op validates its output for NaN/Inf and
/// throws NumericError on violation, so a finished forward pass is finite by
/// construction.
class Tape {
 public:
  using BackwardFn = std::function<void(
      const Tensor& out_value, const Tensor& out_grad,
      std::span<const Tensor* const> in_values, std::span<Tensor* const> in_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Constant input; gradient is computed but discarded.
  Var input(Tensor value);
  /// Leaf bound to a Parameter. backward() stores the adjoint in p.grad
  /// (zeros when p is frozen).
  Var param(Parameter& p);

  // Elementwise.
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  /// scale * x + shift, elementwise with scalar coefficients.
  Var affine(Var x, Real scale, Real shift);
  Var elu(Var x);
  Var sigmoid(Var x);

  // Convolution stack (NCHW).
  Var conv2d(Var x, Var weight, Var bias, int stride = 1, int padding = 0);
  Var maxpool2(Var x);
  Var upsample_nearest2(Var x);
  Var concat_channels(Var a, Var b);
  Var slice_channels(Var x, int begin, int count);
  Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode);
  Var softmax_channels(Var x);
  Var dropout(Var x, Real rate, Rng& rng, Mode mode);
  Var global_avg_pool(Var x);
  /// x[n,c,h,w] * gate[n,c,0,0]; the squeeze-excitation rescale.
  Var scale_channels(Var x, Var gate);

  // Reductions.
  Var sum_all(Var x);

  /// Extension point: record an externally computed op with its adjoint.
  /// The loss functions in metrics.hpp are registered through this.
  Var custom(const char* name, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Reverse sweep from a scalar loss. Populates Parameter::grad for every
  /// leaf bound via param() (zeros for frozen parameters), then clears the
  /// tape. Throws UsageError when loss is not scalar.
  void backward(Var loss);

  void clear();
  std::size_t node_count() const { return nodes_.size(); }

  const Tensor& value_of(int node) const { return nodes_[static_cast<std::size_t>(node)].value; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;          // allocated lazily during backward
    bool grad_live = false;
    std::vector<int> inputs;
    BackwardFn backward;  // empty for leaves
    Parameter* bound = nullptr;
    const char* name = "";
  };

  Var push(const char* name, Tensor value, std::vector<Var> inputs, BackwardFn backward);
  Tensor& grad_slot(int node);
  void check_finite(const Tensor& t, const char* op, const char* what) const;

  std::vector<Node> nodes_;
};

}  // namespace vitiseg

#endif  // VITISEG_TAPE_HPP_
