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

// Central finite-difference oracle. Independent of the tape: it only
// evaluates the forward value of the loss under perturbed parameters.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cida/nn/tensor.hpp"

namespace cida::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[index] analytic vs numeric"
  std::size_t probes = 0;
};

struct NamedCheck {
  std::string name;
  GradCheckResult check;
};

// Relative error with a 1e-2 denominator floor, so entries whose true
// gradient is ~0 are judged on absolute error.
inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-2});
}

/// Parameters whose name starts with an entry of `reversed` sit behind a
/// gradient reversal and must carry -coefficient times the true gradient.
inline GradCheckResult grad_check(const std::vector<nn::ParameterPtr>& params,
                                  const std::function<nn::Tensor()>& loss_fn,
                                  std::size_t max_probes_per_param = 24, double h = 1e-6,
                                  const std::vector<std::string>& reversed = {},
                                  double reversal_coefficient = 1.0, unsigned seed = 7) {
  for (auto& p : params) p->zero_grad();
  nn::Tensor loss = loss_fn();
  nn::backprop(loss);

  GradCheckResult res;
  std::mt19937 rng(seed);
  for (auto& p : params) {
    const bool rev = std::any_of(reversed.begin(), reversed.end(), [&](const std::string& r) {
      return p->name().rfind(r, 0) == 0;
    });
    const double factor = rev ? -reversal_coefficient : 1.0;
    std::vector<std::size_t> idx(p->value().size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (max_probes_per_param && idx.size() > max_probes_per_param) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_probes_per_param);
    }
    std::vector<double> analytic(p->gradient().begin(), p->gradient().end());
    for (auto i : idx) {
      const double orig = p->value()[i];
      p->value()[i] = orig + h;
      const double up = loss_fn().item();
      p->value()[i] = orig - h;
      const double down = loss_fn().item();
      p->value()[i] = orig;
      const double numeric = factor * (up - down) / (2.0 * h);
      const double err = rel_error(analytic[i], numeric);
      ++res.probes;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst = p->name() + "[" + std::to_string(i) + "] " + std::to_string(analytic[i]) +
                    " vs " + std::to_string(numeric);
      }
    }
  }
  return res;
}

inline std::vector<double> random_values(std::size_t n, std::mt19937& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

}  // namespace cida::testing
