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
#include "cida/model/trpn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cida/eval/metrics.hpp"

namespace cida::model {

AnchorGrid generate_anchors(const AnchorConfig& cfg, std::size_t height, std::size_t width) {
  if (cfg.scales.empty() || cfg.ratios.empty() || cfg.stride == 0) {
    throw nn::ContractError("anchor config needs scales, ratios and a stride");
  }
  AnchorGrid grid{cfg.per_location(), height, width, {}};
  grid.boxes.reserve(grid.k * height * width);
  for (Real s : cfg.scales) {
    for (Real r : cfg.ratios) {
      if (s <= 0 || r <= 0) throw nn::ContractError("anchor scales and ratios must be positive");
      const Real w = s * std::sqrt(r), h = s / std::sqrt(r);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const Real cx = (static_cast<Real>(x) + 0.5) * static_cast<Real>(cfg.stride);
          const Real cy = (static_cast<Real>(y) + 0.5) * static_cast<Real>(cfg.stride);
          grid.boxes.push_back({cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h});
        }
      }
    }
  }
  return grid;
}

RpnHead::RpnHead(nn::ParameterSet& params, std::size_t in, std::size_t hidden, std::size_t k,
                 Rng& rng)
    : hidden_(hidden),
      trunk_(params, "rpn.conv", in, hidden, 3, 1, 1, rng),
      cls_(params, "rpn.cls", hidden, k, 1, 1, 0, rng),
      box_(params, "rpn.box", hidden, 4 * k, 1, 1, 0, rng) {}

RpnHead::Output RpnHead::forward(const Tensor& attended) const {
  Tensor feature = nn::relu(trunk_(attended));
  return {nn::sigmoid(cls_(feature)), box_(feature), feature};
}

AnchorDiscriminator::AnchorDiscriminator(nn::ParameterSet& params, std::size_t in, std::size_t k,
                                         Rng& rng)
    : head_(params, "d_rpn.conv", in, k, 1, 1, 0, rng) {}

Tensor AnchorDiscriminator::forward(const Tensor& rpn_feature) const {
  return nn::sigmoid(head_(rpn_feature));
}

std::array<Real, 4> encode_box(const Box& anchor, const Box& target) {
  const Real aw = anchor.width(), ah = anchor.height();
  const Real ax = anchor.x1 + 0.5 * aw, ay = anchor.y1 + 0.5 * ah;
  const Real tw = target.width(), th = target.height();
  const Real tx = target.x1 + 0.5 * tw, ty = target.y1 + 0.5 * th;
  return {(tx - ax) / aw, (ty - ay) / ah, std::log(tw / aw), std::log(th / ah)};
}

Box decode_box(const Box& anchor, const std::array<Real, 4>& d) {
  const Real aw = anchor.width(), ah = anchor.height();
  const Real ax = anchor.x1 + 0.5 * aw, ay = anchor.y1 + 0.5 * ah;
  const Real cx = ax + d[0] * aw, cy = ay + d[1] * ah;
  const Real w = aw * std::exp(std::min(d[2], kMaxLogDelta));
  const Real h = ah * std::exp(std::min(d[3], kMaxLogDelta));
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

Box clip_box(const Box& b, std::size_t image_height, std::size_t image_width) {
  const Real w = static_cast<Real>(image_width), h = static_cast<Real>(image_height);
  return {std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h), std::clamp(b.x2, 0.0, w),
          std::clamp(b.y2, 0.0, h)};
}

DecodedBoxes decode_boxes(const AnchorGrid& anchors, std::span<const Real> deltas,
                          std::size_t image_height, std::size_t image_width) {
  const std::size_t hw = anchors.height * anchors.width;
  if (deltas.size() != 4 * anchors.size()) {
    throw nn::ShapeError("decode_boxes: expected " + std::to_string(4 * anchors.size()) +
                         " deltas, got " + std::to_string(deltas.size()));
  }
  DecodedBoxes out;
  out.boxes.reserve(anchors.size());
  out.valid.reserve(anchors.size());
  for (std::size_t r = 0; r < anchors.size(); ++r) {
    const std::size_t a = r / hw, pos = r % hw;
    std::array<Real, 4> d;
    for (std::size_t j = 0; j < 4; ++j) d[j] = deltas[(a * 4 + j) * hw + pos];
    Box b = clip_box(decode_box(anchors.boxes[r], d), image_height, image_width);
    out.valid.push_back(b.width() >= 1.0 && b.height() >= 1.0);
    out.boxes.push_back(b);
  }
  return out;
}

Tensor loss_adv_rpn(const Tensor& prob_source, const Tensor& prob_target) {
  return domain_bce(prob_source, prob_target);
}

std::vector<Real> proposal_transferability(std::span<const Real> p_rpn, Real eps,
                                           bool full_binary) {
  Tensor p = Tensor::constant({p_rpn.size()}, std::vector<Real>(p_rpn.begin(), p_rpn.end()));
  const Tensor e = nn::pixel_entropy(p, eps, full_binary);
  return {e.values().begin(), e.values().end()};
}

std::vector<Real> reweight_objectness(std::span<const Real> objectness,
                                      std::span<const Real> transferability) {
  if (objectness.size() != transferability.size()) {
    throw nn::ShapeError("objectness and transferability lengths differ");
  }
  std::vector<Real> out(objectness.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = objectness[i] * transferability[i];
  return out;
}

std::vector<std::size_t> nms(const std::vector<Box>& boxes, std::span<const Real> scores,
                             Real iou_threshold) {
  if (boxes.size() != scores.size()) throw nn::ShapeError("nms: boxes and scores differ in length");
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool suppressed = false;
    for (std::size_t j : kept) {
      if (eval::iou(boxes[i], boxes[j]) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::vector<Box> ProposalSet::kept_boxes() const {
  std::vector<Box> out;
  for (auto i : kept) out.push_back(boxes[i]);
  return out;
}

std::vector<Real> ProposalSet::kept_objectness() const {
  std::vector<Real> out;
  for (auto i : kept) out.push_back(objectness[i]);
  return out;
}

ProposalSet make_proposals(DecodedBoxes decoded, std::vector<Real> objectness,
                           std::vector<Real> transferability) {
  const std::size_t n = decoded.boxes.size();
  if (objectness.size() != n) throw nn::ShapeError("one objectness score per proposal required");
  if (transferability.empty()) transferability.assign(n, 1.0);
  ProposalSet p;
  p.reweighted = reweight_objectness(objectness, transferability);
  p.boxes = std::move(decoded.boxes);
  p.valid = std::move(decoded.valid);
  p.objectness = std::move(objectness);
  p.transferability = std::move(transferability);
  return p;
}

ProposalSet select_top_n(ProposalSet proposals, const SelectConfig& cfg) {
  const auto& key = cfg.transferable ? proposals.reweighted : proposals.objectness;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (proposals.valid[i]) candidates.push_back(i);
  }
  std::vector<Box> boxes;
  std::vector<Real> scores;
  for (auto i : candidates) {
    boxes.push_back(proposals.boxes[i]);
    scores.push_back(key[i]);
  }
  auto kept = nms(boxes, scores, cfg.nms_threshold);
  if (kept.size() > cfg.top_n) kept.resize(cfg.top_n);
  proposals.kept.clear();
  for (auto k : kept) proposals.kept.push_back(candidates[k]);
  return proposals;
}

RpnTargets assign_rpn_targets(const AnchorGrid& anchors, const std::vector<Box>& gt,
                              const RpnTargetConfig& cfg, Rng& rng) {
  const std::size_t n = anchors.size();
  RpnTargets t;
  t.labels.assign(n, kIgnore);
  t.deltas.assign(n, {0, 0, 0, 0});
  std::vector<Real> best_iou(n, 0.0);
  std::vector<std::size_t> best_gt(n, 0);
  std::vector<Real> gt_best(gt.size(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const Real v = eval::iou(anchors.boxes[r], gt[g]);
      if (v > best_iou[r]) {
        best_iou[r] = v;
        best_gt[r] = g;
      }
      gt_best[g] = std::max(gt_best[g], v);
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (best_iou[r] < cfg.bg_iou) t.labels[r] = kBackground;
    if (best_iou[r] >= cfg.fg_iou) t.labels[r] = kForeground;
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (gt_best[g] <= 0) continue;
    for (std::size_t r = 0; r < n; ++r) {
      if (eval::iou(anchors.boxes[r], gt[g]) == gt_best[g]) {
        t.labels[r] = kForeground;
        best_gt[r] = g;
      }
    }
  }

  std::vector<std::size_t> fg, bg;
  for (std::size_t r = 0; r < n; ++r) {
    if (t.labels[r] == kForeground) fg.push_back(r);
    if (t.labels[r] == kBackground) bg.push_back(r);
  }
  auto subsample = [&](std::vector<std::size_t>& pool, std::size_t keep) {
    if (pool.size() <= keep) return;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = keep; i < pool.size(); ++i) t.labels[pool[i]] = kIgnore;
    pool.resize(keep);
  };
  const auto max_fg = static_cast<std::size_t>(cfg.fg_fraction * static_cast<Real>(cfg.batch_size));
  subsample(fg, max_fg);
  subsample(bg, cfg.batch_size - fg.size());
  for (auto r : fg) t.deltas[r] = encode_box(anchors.boxes[r], gt[best_gt[r]]);
  return t;
}

RpnLoss rpn_loss(const Tensor& objectness, const Tensor& deltas, const RpnTargets& targets) {
  const std::size_t n = objectness.numel();
  if (targets.labels.size() != n || deltas.numel() != 4 * n) {
    throw nn::ShapeError("rpn_loss: targets do not match the head outputs");
  }
  const std::size_t k = objectness.dim(0), hw = n / k;
  std::vector<std::size_t> sampled, reg_index;
  std::vector<Real> labels, reg_target;
  std::size_t num_fg = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets.labels[r] == kIgnore) continue;
    sampled.push_back(r);
    labels.push_back(targets.labels[r] == kForeground ? 1.0 : 0.0);
    if (targets.labels[r] != kForeground) continue;
    ++num_fg;
    const std::size_t a = r / hw, pos = r % hw;
    for (std::size_t j = 0; j < 4; ++j) {
      reg_index.push_back((a * 4 + j) * hw + pos);
      reg_target.push_back(targets.deltas[r][j]);
    }
  }
  RpnLoss loss;
  if (sampled.empty()) {
    loss.objectness = Tensor::scalar(0.0);
  } else {
    loss.objectness = nn::binary_cross_entropy(nn::gather(objectness, sampled), labels);
  }
  if (num_fg == 0) {
    loss.regression = Tensor::scalar(0.0);
  } else {
    Tensor diff = nn::sub(nn::gather(deltas, reg_index),
                          Tensor::constant({reg_index.size()}, std::move(reg_target)));
    loss.regression = nn::scale(nn::sum(nn::smooth_l1(diff)), 1.0 / static_cast<Real>(num_fg));
  }
  return loss;
}

}  // namespace cida::model
