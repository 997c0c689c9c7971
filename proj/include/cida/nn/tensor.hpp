/* Copyright 2026 The CIDA Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cida::nn {

using Real = double;
using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the dynamic tape. `backward` reads `grad` of this node and
// accumulates into the `grad` of each entry in `inputs`.
struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<Real>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major array with an optional link into the autodiff tape.
/// Tensors are immutable once built; ops return new tensors.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<Real> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Real value);
  static Tensor scalar(Real value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::span<const Real> values() const;
  Real operator[](std::size_t i) const { return values()[i]; }
  Real item() const;
  bool requires_grad() const;

  /// Accumulated gradient after `backprop`; empty if none reached this node.
  std::span<const Real> grad() const;

  /// Same values, cut from the tape.
  Tensor detach() const;

  /// Throws NumericError if any value is NaN or infinite.
  void check_finite(const std::string& what) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Trainable leaf. The value, gradient and momentum buffer always share one shape.
class Parameter {
 public:
  Parameter(std::string name, Shape shape, std::vector<Real> init);

  const std::string& name() const { return name_; }
  const Shape& shape() const { return leaf_->shape; }
  const Tensor& tensor() const { return tensor_; }

  std::span<Real> value() { return leaf_->value; }
  std::span<const Real> value() const { return leaf_->value; }
  std::span<Real> gradient() { return leaf_->grad; }
  std::span<const Real> gradient() const { return leaf_->grad; }
  std::span<Real> momentum_buffer() { return momentum_; }
  std::span<const Real> momentum_buffer() const { return momentum_; }

  void zero_grad();

 private:
  std::string name_;
  std::shared_ptr<detail::Node> leaf_;
  Tensor tensor_;
  std::vector<Real> momentum_;
};

using ParameterPtr = std::shared_ptr<Parameter>;

/// Ordered, name-unique collection of parameters.
class ParameterSet {
 public:
  ParameterPtr add(const std::string& name, Shape shape, std::vector<Real> init);
  ParameterPtr find(const std::string& name) const;
  const std::vector<ParameterPtr>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  void zero_grad();

 private:
  std::vector<ParameterPtr> params_;
};

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// reachable parameter; NaN or infinite gradients raise NumericError.
void backprop(const Tensor& loss);

}  // namespace cida::nn
