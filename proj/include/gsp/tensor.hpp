// Copyright 2026 The gsp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsp/error.hpp"
#include "gsp/rng.hpp"

namespace gsp {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  const void* producer = nullptr;  // tape that recorded this tensor as an output
  std::size_t node = 0;
};

}  // namespace detail

/// Dense row-major tensor with an optional gradient slot.
///
/// Copies share storage: a Tensor is a handle, the way parameters and
/// activations are passed around a recorded graph. Use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : impl_(std::make_shared<detail::TensorStorage<T>>()) {
    validate_shape(shape);
    impl_->data.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
  }

  Tensor(Shape shape, std::vector<T> data) : impl_(std::make_shared<detail::TensorStorage<T>>()) {
    validate_shape(shape);
    if (shape_numel(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                       shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.impl_->data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  static Tensor normal(Shape shape, double mean, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.impl_->data) v = static_cast<T>(rng.normal(mean, stddev));
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T* ptr() { return impl_->data.data(); }
  const T* ptr() const { return impl_->data.data(); }
  T& operator[](std::size_t i) { return impl_->data[i]; }
  const T& operator[](std::size_t i) const { return impl_->data[i]; }

  T& at(std::initializer_list<std::size_t> idx) { return impl_->data[offset(idx)]; }
  const T& at(std::initializer_list<std::size_t> idx) const { return impl_->data[offset(idx)]; }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }

  /// Gradient buffer, allocated as zeros on first use.
  std::span<T> grad_mut() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
  }

  /// Gradient as a standalone tensor (zeros when never accumulated).
  Tensor grad_tensor() const {
    Tensor g(shape());
    if (has_grad()) std::copy(impl_->grad.begin(), impl_->grad.end(), g.impl_->data.begin());
    return g;
  }

  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
  }

  /// True for tensors not produced by a recorded operation.
  bool is_leaf() const { return impl_->producer == nullptr; }

  /// Deep copy of shape and data; no gradient, not attached to any tape.
  Tensor clone() const { return Tensor(impl_->shape, impl_->data); }

  /// Same storage (handle identity).
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(numel());
    std::transform(impl_->data.begin(), impl_->data.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(impl_->shape, std::move(out));
  }

 private:
  friend class Tape<T>;

  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != ndim()) throw ShapeError("index rank does not match tensor rank");
    std::size_t off = 0;
    std::size_t axis = 0;
    for (auto i : idx) off = off * impl_->shape[axis++] + i;
    return off;
  }

  std::shared_ptr<detail::TensorStorage<T>> impl_;
};

}  // namespace gsp
