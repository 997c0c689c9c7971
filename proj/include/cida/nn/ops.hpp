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

#include <array>
#include <vector>

#include "cida/nn/tensor.hpp"

// The fixed op set. Feature maps are C x H x W, row batches are N x D.
// Every op is differentiable in its Tensor arguments unless noted.
namespace cida::nn {

struct GrlConfig {
  Real coefficient = 1.0;
};

// Elementwise arithmetic. Binary ops require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);
Tensor add_scalar(const Tensor& x, Real offset);
Tensor square(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Huber-style penalty: 0.5 x^2 / beta for |x| < beta, |x| - 0.5 beta otherwise.
Tensor smooth_l1(const Tensor& x, Real beta = 1.0);

/// x: C x H x W, mask: H x W. Returns x[c,h,w] * mask[h,w].
Tensor mul_channels(const Tensor& x, const Tensor& mask);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// C x H x W -> C, mean over space.
Tensor global_avg_pool(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
/// Flat gather: out[i] = x.flat[indices[i]].
Tensor gather(const Tensor& x, const std::vector<std::size_t>& indices);
/// Row gather on an N x D tensor.
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows);
/// Concatenate along `axis`; all other extents must agree.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// D -> n x D.
Tensor repeat_rows(const Tensor& v, std::size_t n);

/// x: C x H x W, weight: O x C x k x k, bias: O (may be undefined).
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
/// x: N x I, weight: O x I, bias: O. Returns N x O.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Half-pixel-centred (align_corners = false) bilinear resampling of C x H x W.
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

/// Identity forward; backward multiplies the upstream gradient by -coefficient.
Tensor gradient_reversal(const Tensor& x, const GrlConfig& cfg = {});

/// Row-wise softmax over the last axis of an N x K tensor.
Tensor softmax(const Tensor& logits);
/// Mean over rows of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Mean binary cross-entropy of probabilities against targets in {0,1},
/// with probabilities clamped to [eps, 1 - eps].
Tensor binary_cross_entropy(const Tensor& prob, const std::vector<Real>& targets,
                            Real eps = 1e-7);
/// Same, against one shared target.
Tensor binary_cross_entropy(const Tensor& prob, Real target, Real eps = 1e-7);

/// -p ln p with p clamped to [eps, 1]; `full_binary` adds the -(1-p) ln(1-p) term.
Tensor pixel_entropy(const Tensor& prob, Real eps = 1e-7, bool full_binary = false);

struct RoiAlignConfig {
  std::size_t output_size = 7;
  std::size_t sampling_ratio = 2;
  Real spatial_scale = 1.0;
};

/// Bilinear ROI-align. boxes are (x1,y1,x2,y2) in input-image pixels;
/// returns n x C x S x S.
Tensor roi_align(const Tensor& feature, const std::vector<std::array<Real, 4>>& boxes,
                 const RoiAlignConfig& cfg);

}  // namespace cida::nn
