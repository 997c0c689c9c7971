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
#include "cida/model/layers.hpp"

#include <cmath>

namespace cida::model {

std::vector<Real> kaiming_uniform(std::size_t count, std::size_t fan_in, Rng& rng) {
  const Real bound = std::sqrt(6.0 / static_cast<Real>(fan_in));
  std::uniform_real_distribution<Real> u(-bound, bound);
  std::vector<Real> v(count);
  for (auto& x : v) x = u(rng);
  return v;
}

Conv2d::Conv2d(nn::ParameterSet& params, const std::string& name, std::size_t in,
               std::size_t out, std::size_t kernel, std::size_t stride, std::size_t padding,
               Rng& rng)
    : stride_(stride), padding_(padding) {
  const std::size_t fan_in = in * kernel * kernel;
  weight_ = params.add(name + ".weight", {out, in, kernel, kernel},
                       kaiming_uniform(out * fan_in, fan_in, rng));
  bias_ = params.add(name + ".bias", {out}, std::vector<Real>(out, 0.0));
}

Linear::Linear(nn::ParameterSet& params, const std::string& name, std::size_t in,
               std::size_t out, Rng& rng) {
  weight_ = params.add(name + ".weight", {out, in}, kaiming_uniform(out * in, in, rng));
  bias_ = params.add(name + ".bias", {out}, std::vector<Real>(out, 0.0));
}

Tensor domain_bce(const Tensor& prob_source, const Tensor& prob_target) {
  std::vector<Tensor> terms;
  if (prob_source.defined()) terms.push_back(nn::binary_cross_entropy(prob_source, 0.0));
  if (prob_target.defined()) terms.push_back(nn::binary_cross_entropy(prob_target, 1.0));
  if (terms.empty()) throw nn::ContractError("domain loss needs at least one domain");
  if (terms.size() == 1) return terms[0];
  return nn::scale(nn::add(terms[0], terms[1]), 0.5);
}

}  // namespace cida::model
