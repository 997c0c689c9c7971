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

#include <random>
#include <string>

#include "cida/nn/ops.hpp"

namespace cida::model {

using nn::Real;
using nn::Tensor;
using Rng = std::mt19937_64;

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero bias.
std::vector<Real> kaiming_uniform(std::size_t count, std::size_t fan_in, Rng& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(nn::ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
         std::size_t kernel, std::size_t stride, std::size_t padding, Rng& rng);

  Tensor operator()(const Tensor& x) const {
    return nn::conv2d(x, weight_->tensor(), bias_->tensor(), stride_, padding_);
  }
  std::size_t out_channels() const { return weight_->shape()[0]; }

 private:
  nn::ParameterPtr weight_, bias_;
  std::size_t stride_ = 1, padding_ = 0;
};

class Linear {
 public:
  Linear() = default;
  Linear(nn::ParameterSet& params, const std::string& name, std::size_t in, std::size_t out,
         Rng& rng);

  Tensor operator()(const Tensor& x) const {
    return nn::linear(x, weight_->tensor(), bias_->tensor());
  }

 private:
  nn::ParameterPtr weight_, bias_;
};

/// Domain-classification cross-entropy with label 0 for source and 1 for
/// target: the mean of the two per-domain means. Either side may be undefined.
Tensor domain_bce(const Tensor& prob_source, const Tensor& prob_target);

}  // namespace cida::model
