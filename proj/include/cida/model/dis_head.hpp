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

#include "cida/data/types.hpp"
#include "cida/model/backbone_mua.hpp"

namespace cida::model {

using data::Annotation;
using data::Box;

/// ROI-align of the final feature map (stride `stride`) to S x S bins.
/// Returns n x C x S x S.
Tensor roi_pool(const FeatureMap& feature, const std::vector<Box>& boxes, std::size_t stride,
                std::size_t output_size = 7);

struct ProposalLabelConfig {
  Real fg_iou = 0.5;  // theta_H
  Real bg_iou = 0.1;  // theta_L
  std::size_t batch_size = 128;
  Real fg_fraction = 0.25;
  bool append_ground_truth = true;
};

/// Box-regression targets are divided by these before the loss.
inline constexpr std::array<Real, 4> kBoxTargetStd{0.1, 0.1, 0.2, 0.2};

struct LabeledRois {
  std::vector<Box> boxes;
  std::vector<int> labels;  // 0 background, c + 1 for object class c
  std::vector<std::array<Real, 4>> targets;  // normalized deltas, zero for background

  std::size_t size() const { return boxes.size(); }
};

/// IoU >= fg_iou: foreground with the matched class; bg_iou <= IoU < fg_iou:
/// background; below bg_iou: discarded. Then a random subset of at most
/// batch_size with at most fg_fraction foreground.
LabeledRois label_proposals(const std::vector<Box>& proposals, const Annotation& gt,
                            const ProposalLabelConfig& cfg, Rng& rng);

/// fc + ReLU over flattened ROI features, then class logits (C + 1) and
/// class-specific box deltas (4C).
class DetectionHead {
 public:
  struct Output {
    Tensor logits;  // n x (C + 1)
    Tensor deltas;  // n x 4C
  };

  DetectionHead() = default;
  DetectionHead(nn::ParameterSet& params, std::size_t in, std::size_t hidden, int num_classes,
                Rng& rng);

  Output forward(const Tensor& pooled) const;
  int num_classes() const { return num_classes_; }

 private:
  int num_classes_ = 0;
  Linear fc_, cls_, box_;
};

struct DetectionLosses {
  Tensor cls;
  Tensor reg;  // smooth-L1 summed over coordinates, mean over foreground
};

DetectionLosses detection_losses(const DetectionHead::Output& out, const LabeledRois& rois);

/// Top-N objectness scores in rank order, padded with zeros to N, floored at
/// eps and rescaled to sum to one. Entries are compared position by position.
struct ObjectnessDistribution {
  std::vector<Real> values;
  std::vector<Real> normalized;

  static ObjectnessDistribution from_scores(std::vector<Real> scores, std::size_t n,
                                            Real eps = 1e-7);
};

/// KL(src || tgt) of the normalized distributions, before clamping.
Real kl_divergence(const ObjectnessDistribution& src, const ObjectnessDistribution& tgt);
/// KL(src || tgt) clamped to [0, 1]. Both lists are padded to their common length.
Real kl_objectness(const std::vector<Real>& source_scores, const std::vector<Real>& target_scores,
                   Real eps = 1e-7);

/// Mean over pixels of the auxiliary discriminator's output on a target image.
Real hardness_score(const Tensor& dis_prob);
/// Non-adversarial domain cross-entropy of the auxiliary discriminator.
Tensor loss_dis(const Tensor& prob_source, const Tensor& prob_target);

struct DisState {
  std::size_t n = 300;
  std::size_t n_min = 16;
  std::size_t n_final = 300;
};

/// clamp(floor(N * 0.5 * (hardness + 1 - kl)), N_min, N). Stores the result
/// in state.n_final and returns it.
std::size_t dynamic_sample_count(DisState& state, Real hardness, Real kl);

/// Instance-level domain classifier over [ROI feature, image context]:
/// fc + ReLU, fc + ReLU, fc + sigmoid.
class InstanceDiscriminator {
 public:
  InstanceDiscriminator() = default;
  InstanceDiscriminator(nn::ParameterSet& params, std::size_t roi_dim, std::size_t context_dim,
                        Rng& rng);

  /// rois: n x roi_dim, context: context_dim. Returns n probabilities.
  Tensor forward(const Tensor& rois, const Tensor& context) const;

 private:
  Linear fc1_, fc2_, fc3_;
};

Tensor loss_adv_ins(const Tensor& prob_source, const Tensor& prob_target);

}  // namespace cida::model
