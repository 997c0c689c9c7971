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

#include <cstdint>
#include <vector>

#include "cida/eval/metrics.hpp"
#include "cida/model/backbone_mua.hpp"
#include "cida/model/dis_head.hpp"
#include "cida/model/trpn.hpp"

namespace cida::model {

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t disc_hidden = 32;
  AnchorConfig anchors;
  std::size_t rpn_hidden = 64;
  std::size_t head_hidden = 128;
  std::size_t roi_size = 7;
  int num_classes = 3;
  AttentionMode attention = AttentionMode::kRaw;
  EntropyConfig entropy;
};

/// Which mechanisms a forward pass uses.
struct PassOptions {
  bool mua = true;
  bool trpn = true;
  bool fusion = true;          // compute M even when the attention is off
  Real grl_coefficient = 1.0;  // reversal strength on every adversarial branch
  SelectConfig select;
};

/// Everything one image contributes to the losses or to inference.
struct ImagePass {
  std::vector<FeatureMap> features;
  FusedFeature fused;
  PixelDiscriminator::Output fus;  // D_fus on the reversed embedding
  AttentionMap attention;
  FeatureMap attended;             // MUA output, or f_L when MUA is off
  RpnHead::Output rpn;
  Tensor p_rpn;                    // D_rpn on the reversed RPN feature
  AnchorGrid anchors;
  ProposalSet proposals;
};

/// All parameters of the detector and of every discriminator. Components are
/// always built, in a fixed order, so one seed gives one initialization for
/// every variant.
class Detector {
 public:
  Detector(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  ImagePass forward_image(const Tensor& image, const PassOptions& opt) const;

  /// D_img^l probabilities on reversed backbone features, one per layer.
  std::vector<PixelDiscriminator::Output> image_discriminators(const ImagePass& pass,
                                                               Real grl_coefficient) const;
  /// Pooled penultimate activation of D_fus (or of the last D_img when
  /// `from_fusion` is false), detached.
  Tensor context_vector(const ImagePass& pass, bool from_fusion) const;
  /// Auxiliary discriminator on the detached embedding.
  Tensor dis_probability(const ImagePass& pass) const;
  Tensor pool(const ImagePass& pass, const std::vector<Box>& boxes) const;

  const Backbone& backbone() const { return backbone_; }
  const DetectionHead& head() const { return head_; }
  const InstanceDiscriminator& d_ins() const { return d_ins_; }
  std::size_t roi_dim() const;

 private:
  ModelConfig cfg_;
  nn::ParameterSet params_;
  Backbone backbone_;
  MultiScaleFusion fusion_;
  std::vector<PixelDiscriminator> d_img_;
  PixelDiscriminator d_fus_;
  RpnHead rpn_;
  AnchorDiscriminator d_rpn_;
  PixelDiscriminator d_dis_;
  DetectionHead head_;
  InstanceDiscriminator d_ins_;
};

struct InferOptions {
  bool mua = true;
  bool trpn = true;
  bool dis = true;  // accepted for symmetry; instance sampling never runs at inference
  std::size_t top_n = 64;
  Real rpn_nms = 0.7;
  Real score_threshold = 0.05;
  Real nms_threshold = 0.5;
  std::size_t max_detections = 100;
};

/// Detections of one image, best first. `image` of each entry is 0.
std::vector<eval::Detection> infer(const Detector& model, const Tensor& image,
                                   const InferOptions& opt);

}  // namespace cida::model
