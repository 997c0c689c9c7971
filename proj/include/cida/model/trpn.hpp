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
#include <cstdint>
#include <vector>

#include "cida/data/types.hpp"
#include "cida/model/layers.hpp"

namespace cida::model {

using data::Box;

struct AnchorConfig {
  std::vector<Real> scales{8, 16, 32};
  std::vector<Real> ratios{0.5, 1.0, 2.0};
  std::size_t stride = 8;

  std::size_t per_location() const { return scales.size() * ratios.size(); }
};

/// Anchor r = (a * H + y) * W + x with a = scale_index * |ratios| + ratio_index,
/// i.e. the flat index of a k x H x W map. Sizes are w = s * sqrt(ratio),
/// h = s / sqrt(ratio) (ratio is w / h, area exactly s^2, no rounding),
/// centred on ((x + 0.5) * stride, (y + 0.5) * stride).
struct AnchorGrid {
  std::size_t k = 0, height = 0, width = 0;
  std::vector<Box> boxes;

  std::size_t size() const { return boxes.size(); }
};

AnchorGrid generate_anchors(const AnchorConfig& cfg, std::size_t height, std::size_t width);

/// 3x3 conv + ReLU shared trunk with sigmoid objectness (k channels) and
/// linear box deltas (4k channels, anchor-major: channel a * 4 + j).
class RpnHead {
 public:
  struct Output {
    Tensor objectness;  // k x H x W
    Tensor deltas;      // 4k x H x W
    Tensor feature;     // hidden x H x W
  };

  RpnHead() = default;
  RpnHead(nn::ParameterSet& params, std::size_t in, std::size_t hidden, std::size_t k, Rng& rng);

  Output forward(const Tensor& attended) const;
  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t hidden_ = 0;
  Conv2d trunk_, cls_, box_;
};

/// One domain probability per anchor: 1x1 conv to k channels + sigmoid.
class AnchorDiscriminator {
 public:
  AnchorDiscriminator() = default;
  AnchorDiscriminator(nn::ParameterSet& params, std::size_t in, std::size_t k, Rng& rng);

  Tensor forward(const Tensor& rpn_feature) const;  // k x H x W

 private:
  Conv2d head_;
};

/// Largest allowed log-scale delta, ln(1000 / 16).
inline constexpr Real kMaxLogDelta = 4.135166556742356;

/// Standard (tx, ty, tw, th) parameterization relative to an anchor.
std::array<Real, 4> encode_box(const Box& anchor, const Box& target);
Box decode_box(const Box& anchor, const std::array<Real, 4>& delta);

struct DecodedBoxes {
  std::vector<Box> boxes;
  std::vector<bool> valid;  // false when width or height fell below 1 px after clipping
};

/// Decodes every anchor with its deltas (4k x H x W tensor layout), clipping
/// to [0, width] x [0, height].
DecodedBoxes decode_boxes(const AnchorGrid& anchors, std::span<const Real> deltas,
                          std::size_t image_height, std::size_t image_width);

Box clip_box(const Box& b, std::size_t image_height, std::size_t image_width);

/// Anchor-wise domain cross-entropy over the D_rpn maps of both domains.
Tensor loss_adv_rpn(const Tensor& prob_source, const Tensor& prob_target);

/// E_r = -p_r ln p_r of the anchor domain probabilities.
std::vector<Real> proposal_transferability(std::span<const Real> p_rpn, Real eps = 1e-7,
                                           bool full_binary = false);
std::vector<Real> reweight_objectness(std::span<const Real> objectness,
                                      std::span<const Real> transferability);

/// Greedy NMS. Candidates are visited by descending score, equal scores by
/// ascending index; a candidate is suppressed when its IoU with an already
/// kept box exceeds `iou_threshold`. Returns kept indices in visiting order.
std::vector<std::size_t> nms(const std::vector<Box>& boxes, std::span<const Real> scores,
                             Real iou_threshold);

struct ProposalSet {
  std::vector<Box> boxes;
  std::vector<Real> objectness;
  std::vector<Real> transferability;
  std::vector<Real> reweighted;
  std::vector<bool> valid;
  std::vector<std::size_t> kept;  // ranked, best first

  std::size_t size() const { return boxes.size(); }
  std::vector<Box> kept_boxes() const;
  std::vector<Real> kept_objectness() const;
};

/// Assembles a proposal set with reweighted = objectness * transferability.
/// An empty `transferability` stands for E = 1 everywhere.
ProposalSet make_proposals(DecodedBoxes decoded, std::vector<Real> objectness,
                           std::vector<Real> transferability);

struct SelectConfig {
  std::size_t top_n = 64;
  Real nms_threshold = 0.7;
  bool transferable = true;  // rank by reweighted objectness instead of raw
};

/// NMS over the valid proposals on the ranking key, then the best
/// min(top_n, survivors) are kept.
ProposalSet select_top_n(ProposalSet proposals, const SelectConfig& cfg);

enum AnchorLabel : int { kIgnore = -1, kBackground = 0, kForeground = 1 };

struct RpnTargetConfig {
  Real fg_iou = 0.7;
  Real bg_iou = 0.3;
  std::size_t batch_size = 64;
  Real fg_fraction = 0.5;
};

struct RpnTargets {
  std::vector<int> labels;                    // per anchor, after sampling
  std::vector<std::array<Real, 4>> deltas;    // regression targets, meaningful for fg
};

/// Foreground: IoU >= fg_iou with some box, or the best anchor of a box.
/// Background: max IoU < bg_iou. A random minibatch of at most batch_size
/// anchors with at most fg_fraction foreground keeps its labels; the rest
/// become ignore.
RpnTargets assign_rpn_targets(const AnchorGrid& anchors, const std::vector<Box>& gt,
                              const RpnTargetConfig& cfg, Rng& rng);

struct RpnLoss {
  Tensor objectness;  // mean BCE over sampled anchors
  Tensor regression;  // smooth-L1 summed over coordinates, mean over fg anchors
};

RpnLoss rpn_loss(const Tensor& objectness, const Tensor& deltas, const RpnTargets& targets);

}  // namespace cida::model
