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

// Finite-difference checks of every differentiable op on small random inputs.

#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "cida/nn/ops.hpp"
#include "grad_check.hpp"

namespace cida::testing {

inline std::vector<NamedCheck> check_ops() {
  using namespace cida::nn;
  std::vector<NamedCheck> out;
  {
    std::mt19937 rng(11);
    ParameterSet ps;
    auto x = Tensor::constant({3, 9, 9}, random_values(243, rng));
    auto w1 = ps.add("w1", {4, 3, 3, 3}, random_values(108, rng, -0.5, 0.5));
    auto b1 = ps.add("b1", {4}, random_values(4, rng, -0.1, 0.1));
    auto w2 = ps.add("w2", {2, 4, 3, 3}, random_values(72, rng, -0.5, 0.5));
    auto b2 = ps.add("b2", {2}, random_values(2, rng, -0.1, 0.1));
    auto w3 = ps.add("w3", {3, 2, 1, 1}, random_values(6, rng, -0.5, 0.5));
    out.push_back({"conv2d", grad_check(ps.all(), [&] {
      auto h = relu(conv2d(x, w1->tensor(), b1->tensor(), 2, 1));
      auto y = conv2d(h, w2->tensor(), b2->tensor(), 1, 1);
      return sum(square(conv2d(y, w3->tensor(), Tensor(), 1, 0)));
    }, 0)});
  }

  std::mt19937 rng(5);
  ParameterSet ps;
  auto fm = ps.add("fm", {2, 4, 5}, random_values(40, rng));
  auto mask = ps.add("mask", {4, 5}, random_values(20, rng, 0.1, 1.0));
  auto rows = ps.add("rows", {3, 4}, random_values(12, rng));
  auto w = ps.add("w", {2, 4}, random_values(8, rng));
  auto b = ps.add("b", {2}, random_values(2, rng));
  auto v = ps.add("v", {3}, random_values(3, rng));
  const std::vector<int> labels{0, 1, 1};
  auto vec = [](std::vector<Real> x) {
    const std::size_t n = x.size();
    return Tensor::constant({n}, std::move(x));
  };

  std::vector<std::pair<std::string, std::function<Tensor()>>> cases = {
      {"add/sub/mul", [&] { return sum(mul(add(fm->tensor(), fm->tensor()), sub(fm->tensor(), scale(fm->tensor(), 0.3)))); }},
      {"add_scalar", [&] { return sum(square(add_scalar(v->tensor(), 0.7))); }},
      {"relu", [&] { return sum(mul(relu(fm->tensor()), fm->tensor())); }},
      {"sigmoid", [&] { return sum(sigmoid(fm->tensor())); }},
      {"smooth_l1", [&] { return sum(smooth_l1(scale(fm->tensor(), 2.0))); }},
      {"mul_channels", [&] { return sum(square(mul_channels(fm->tensor(), mask->tensor()))); }},
      {"mean", [&] { return mean(square(fm->tensor())); }},
      {"global_avg_pool", [&] { return sum(square(global_avg_pool(fm->tensor()))); }},
      {"reshape/gather", [&] { return sum(square(gather(reshape(fm->tensor(), {40}), {0, 3, 3, 39}))); }},
      {"gather_rows", [&] { return sum(square(gather_rows(rows->tensor(), {2, 0, 2}))); }},
      {"concat0", [&] { return sum(square(concat({fm->tensor(), fm->tensor()}, 0))); }},
      {"concat1", [&] { return sum(square(concat({rows->tensor(), repeat_rows(v->tensor(), 3)}, 1))); }},
      {"linear", [&] { return sum(square(linear(rows->tensor(), w->tensor(), b->tensor()))); }},
      {"bilinear_resize", [&] { return sum(square(bilinear_resize(fm->tensor(), 3, 7))); }},
      {"softmax", [&] { return sum(square(softmax(rows->tensor()))); }},
      {"cross_entropy", [&] { return cross_entropy(rows->tensor(), labels); }},
      {"bce", [&] { return binary_cross_entropy(sigmoid(rows->tensor()), std::vector<Real>{0, 1, 1, 0, 0, 0, 1, 1, 0, 1, 0, 1}); }},
      {"pixel_entropy", [&] { return sum(pixel_entropy(sigmoid(mask->tensor()))); }},
      {"pixel_entropy_full", [&] { return sum(pixel_entropy(sigmoid(mask->tensor()), 1e-7, true)); }},
      {"roi_align", [&] { return sum(square(roi_align(fm->tensor(), {{0.5, 1.0, 7.0, 6.5}, {2.0, 0.0, 9.5, 8.0}}, {3, 2, 0.5}))); }},
      {"dot", [&] { return sum(mul(v->tensor(), vec({0.3, -1.2, 2.0}))); }},
  };
  for (auto& [name, fn] : cases) out.push_back({name, grad_check(ps.all(), fn, 0)});

  // Only `rows` sits behind the reversal.
  out.push_back({"gradient_reversal", grad_check(ps.all(), [&] {
    return sum(sigmoid(linear(gradient_reversal(rows->tensor(), {0.75}), w->tensor(), b->tensor())));
  }, 0, 1e-6, {"rows"}, 0.75)});
  return out;
}

}  // namespace cida::testing
