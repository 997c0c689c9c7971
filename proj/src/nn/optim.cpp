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
#include "cida/nn/optim.hpp"

namespace cida::nn {

void sgd_momentum_step(ParameterSet& params, Real lr, Real momentum) {
  if (!(lr > 0.0)) throw ContractError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("momentum must be in [0, 1)");
  for (auto& p : params.all()) {
    auto value = p->value();
    auto grad = p->gradient();
    auto v = p->momentum_buffer();
    for (std::size_t i = 0; i < value.size(); ++i) {
      v[i] = momentum * v[i] + grad[i];
      value[i] -= lr * v[i];
    }
  }
}

}  // namespace cida::nn
