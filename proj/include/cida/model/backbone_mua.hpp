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

// Image-level features, the per-layer and multi-scale domain
// discriminators, and the uncertainty attention applied to the last feature.

#include <vector>

#include "cida/data/types.hpp"
#include "cida/model/layers.hpp"

namespace cida::model {

/// Output of backbone stage `layer` (1-based), C_l x H_l x W_l.
struct FeatureMap {
  std::size_t layer = 0;
  Tensor data;
};

/// Multi-scale embedding M, C_L x H_L x W_L.
struct FusedFeature {
  Tensor data;
};

/// Per-pixel domain uncertainty, H_L x W_L, entries in [0, 1/e].
/// Always detached from the tape.
struct AttentionMap {
  Tensor data;
};

enum class AttentionMode { kRaw, kResidual };

struct BackboneConfig {
  std::vector<std::size_t> widths{16, 32, 64};
};

/// L stride-2 stages: conv3x3/s2 + ReLU + conv3x3 + ReLU.
class Backbone {
 public:
  Backbone() = default;
  Backbone(nn::ParameterSet& params, const BackboneConfig& cfg, Rng& rng);

  /// Throws ShapeError for images smaller than 2^L in either extent.
  std::vector<FeatureMap> extract_features(const Tensor& image) const;

  std::size_t num_layers() const { return widths_.size(); }
  std::size_t stride() const { return std::size_t{1} << widths_.size(); }
  const std::vector<std::size_t>& widths() const { return widths_; }

 private:
  std::vector<std::size_t> widths_;
  std::vector<Conv2d> down_, refine_;
};

/// Resize every layer to H_L x W_L, concatenate channels, embed with a 1x1 conv.
class MultiScaleFusion {
 public:
  MultiScaleFusion() = default;
  MultiScaleFusion(nn::ParameterSet& params, const std::vector<std::size_t>& widths, Rng& rng);

  FusedFeature fuse(const std::vector<FeatureMap>& features) const;

 private:
  std::size_t layers_ = 0;
  Conv2d embed_;
};

/// Fully convolutional domain classifier: conv3x3 + ReLU, conv1x1 + ReLU,
/// conv1x1 + sigmoid. Outputs one probability of "target" per pixel.
class PixelDiscriminator {
 public:
  struct Output {
    Tensor prob;         // H x W
    Tensor penultimate;  // hidden x H x W
  };

  PixelDiscriminator() = default;
  PixelDiscriminator(nn::ParameterSet& params, const std::string& name, std::size_t in,
                     std::size_t hidden, Rng& rng);

  Output forward(const Tensor& x) const;
  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t hidden_ = 0;
  Conv2d c1_, c2_, c3_;
};

struct EntropyConfig {
  Real eps = 1e-7;
  bool full_binary = false;
};

/// -p ln p per entry (plus -(1-p) ln(1-p) with `full_binary`).
/// Throws std::domain_error for entries outside [0,1] beyond eps.
Tensor pixel_entropy(const Tensor& prob, const EntropyConfig& cfg = {});

/// Entropy of an already computed D_fus probability map, detached.
AttentionMap attention_from_probability(const Tensor& fus_prob, const EntropyConfig& cfg = {});
AttentionMap compute_mua(const FusedFeature& fused, const PixelDiscriminator& d_fus,
                         const EntropyConfig& cfg = {});

/// raw: f * E, residual: f * (1 + E), broadcast over channels.
FeatureMap apply_attention(const FeatureMap& last, const AttentionMap& attention,
                           AttentionMode mode = AttentionMode::kRaw);

/// Least-squares adversarial loss on D_fus outputs: mean(p_s^2) + mean((1 - p_t)^2).
/// Either side may be undefined to drop its term.
Tensor loss_adv_fus(const Tensor& prob_source, const Tensor& prob_target);

/// Per-image, per-layer pixel probabilities of D_img^l. Binary cross-entropy
/// against the image's domain, averaged over pixels, then layers, then images.
Tensor loss_adv_img(const std::vector<std::vector<Tensor>>& probs_per_image,
                    const std::vector<data::Domain>& domains);

}  // namespace cida::model
