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
#include "cida/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace cida::nn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<Real> values) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("zero extent in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return node;
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<Real> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values)));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, Real value) {
  auto n = shape_numel(shape);
  return constant(std::move(shape), std::vector<Real>(n, value));
}

Tensor Tensor::scalar(Real value) { return constant({1}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::span<const Real> Tensor::values() const { return node_->value; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
std::span<const Real> Tensor::grad() const { return node_->grad; }

Real Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return constant(node_->shape, node_->value); }

void Tensor::check_finite(const std::string& what) const {
  for (Real v : node_->value) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
  }
}

Parameter::Parameter(std::string name, Shape shape, std::vector<Real> init)
    : name_(std::move(name)), leaf_(make_leaf(std::move(shape), std::move(init))) {
  leaf_->requires_grad = true;
  leaf_->ensure_grad();
  momentum_.assign(leaf_->value.size(), 0.0);
  tensor_ = Tensor(leaf_);
}

void Parameter::zero_grad() { std::fill(leaf_->grad.begin(), leaf_->grad.end(), 0.0); }

ParameterPtr ParameterSet::add(const std::string& name, Shape shape, std::vector<Real> init) {
  if (find(name)) throw ContractError("duplicate parameter name " + name);
  auto p = std::make_shared<Parameter>(name, std::move(shape), std::move(init));
  params_.push_back(p);
  return p;
}

ParameterPtr ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name() == name) return p;
  }
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void backprop(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backprop requires a scalar loss");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->inputs.empty()) n->grad.assign(n->value.size(), 0.0);
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
  for (auto* n : order) {
    if (!n->inputs.empty()) continue;
    for (Real g : n->grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient reached a parameter");
    }
  }
}

}  // namespace cida::nn
