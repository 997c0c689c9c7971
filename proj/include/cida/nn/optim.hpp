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

#include "cida/nn/tensor.hpp"

namespace cida::nn {

/// Classic (heavy-ball) momentum:
///   v <- momentum * v + grad
///   p <- p - lr * v
/// Gradients are left in place; callers zero them before the next backprop.
void sgd_momentum_step(ParameterSet& params, Real lr, Real momentum);

}  // namespace cida::nn
