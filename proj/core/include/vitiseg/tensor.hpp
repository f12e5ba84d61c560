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

#ifndef VITISEG_TENSOR_HPP_
#define VITISEG_TENSOR_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace vitiseg {

/// Scalar type for all differentiable computation. Inference and training run
/// in 64-bit; every tolerance in the test suite assumes it.
using Real = double;

/// Dense n-dimensional array, row-major. The carrier for all network
/// activations and parameters. Most of the toolkit uses the NCHW layout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<Real> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, Real value);
  static Tensor scalar(Real value) { return Tensor({1}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Real* data() { return data_.data(); }
  const Real* data() const { return data_.data(); }
  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  /// NCHW element access. Only valid for 4-d tensors.
  Real& at(int n, int c, int h, int w) {
    return data_[idx(n, c, h, w)];
  }
  Real at(int n, int c, int h, int w) const {
    return data_[idx(n, c, h, w)];
  }
  std::size_t idx(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(Real value);

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<Real> data_;
};

/// A trainable (or frozen) tensor with its gradient slot.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())),
        trainable(train) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace vitiseg

#endif  // VITISEG_TENSOR_HPP_
