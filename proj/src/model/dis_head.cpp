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
#include "cida/model/dis_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cida/eval/metrics.hpp"
#include "cida/model/trpn.hpp"

namespace cida::model {

Tensor roi_pool(const FeatureMap& feature, const std::vector<Box>& boxes, std::size_t stride,
                std::size_t output_size) {
  std::vector<std::array<Real, 4>> raw;
  raw.reserve(boxes.size());
  for (const auto& b : boxes) raw.push_back(b.as_array());
  nn::RoiAlignConfig cfg;
  cfg.output_size = output_size;
  cfg.spatial_scale = 1.0 / static_cast<Real>(stride);
  return nn::roi_align(feature.data, raw, cfg);
}

LabeledRois label_proposals(const std::vector<Box>& proposals, const Annotation& gt,
                            const ProposalLabelConfig& cfg, Rng& rng) {
  std::vector<Box> candidates = proposals;
  if (cfg.append_ground_truth) {
    candidates.insert(candidates.end(), gt.boxes.begin(), gt.boxes.end());
  }
  std::vector<std::size_t> fg, bg;
  std::vector<std::size_t> match(candidates.size(), 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Real best = 0.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const Real v = eval::iou(candidates[i], gt.boxes[g]);
      if (v > best) {
        best = v;
        match[i] = g;
      }
    }
    if (best >= cfg.fg_iou) {
      fg.push_back(i);
    } else if (best >= cfg.bg_iou) {
      bg.push_back(i);
    }
  }
  const auto max_fg = static_cast<std::size_t>(cfg.fg_fraction * static_cast<Real>(cfg.batch_size));
  if (fg.size() > max_fg) {
    std::shuffle(fg.begin(), fg.end(), rng);
    fg.resize(max_fg);
  }
  const std::size_t max_bg = cfg.batch_size - fg.size();
  if (bg.size() > max_bg) {
    std::shuffle(bg.begin(), bg.end(), rng);
    bg.resize(max_bg);
  }
  LabeledRois out;
  for (auto i : fg) {
    const Box& g = gt.boxes[match[i]];
    auto d = encode_box(candidates[i], g);
    for (std::size_t j = 0; j < 4; ++j) d[j] /= kBoxTargetStd[j];
    out.boxes.push_back(candidates[i]);
    out.labels.push_back(gt.classes[match[i]] + 1);
    out.targets.push_back(d);
  }
  for (auto i : bg) {
    out.boxes.push_back(candidates[i]);
    out.labels.push_back(0);
    out.targets.push_back({0, 0, 0, 0});
  }
  return out;
}

DetectionHead::DetectionHead(nn::ParameterSet& params, std::size_t in, std::size_t hidden,
                             int num_classes, Rng& rng)
    : num_classes_(num_classes),
      fc_(params, "head.fc", in, hidden, rng),
      cls_(params, "head.cls", hidden, static_cast<std::size_t>(num_classes) + 1, rng),
      box_(params, "head.box", hidden, 4 * static_cast<std::size_t>(num_classes), rng) {}

DetectionHead::Output DetectionHead::forward(const Tensor& pooled) const {
  const std::size_t n = pooled.dim(0);
  Tensor h = nn::relu(fc_(nn::reshape(pooled, {n, pooled.numel() / n})));
  return {cls_(h), box_(h)};
}

DetectionLosses detection_losses(const DetectionHead::Output& out, const LabeledRois& rois) {
  const std::size_t n = rois.size();
  if (out.logits.dim(0) != n) throw nn::ShapeError("detection_losses: one label per ROI required");
  DetectionLosses loss;
  loss.cls = nn::cross_entropy(out.logits, rois.labels);
  const std::size_t width = out.deltas.dim(1);
  std::vector<std::size_t> index;
  std::vector<Real> target;
  std::size_t num_fg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rois.labels[i] == 0) continue;
    ++num_fg;
    const auto c = static_cast<std::size_t>(rois.labels[i] - 1);
    for (std::size_t j = 0; j < 4; ++j) {
      index.push_back(i * width + c * 4 + j);
      target.push_back(rois.targets[i][j]);
    }
  }
  if (num_fg == 0) {
    loss.reg = Tensor::scalar(0.0);
  } else {
    Tensor diff = nn::sub(nn::gather(out.deltas, index),
                          Tensor::constant({index.size()}, std::move(target)));
    loss.reg = nn::scale(nn::sum(nn::smooth_l1(diff)), 1.0 / static_cast<Real>(num_fg));
  }
  return loss;
}

ObjectnessDistribution ObjectnessDistribution::from_scores(std::vector<Real> scores,
                                                           std::size_t n, Real eps) {
  if (scores.size() > n) throw nn::ContractError("more scores than the distribution length");
  ObjectnessDistribution d;
  scores.resize(n, 0.0);
  d.values = scores;
  Real total = 0;
  for (auto& v : scores) {
    v = std::max(v, eps);
    total += v;
  }
  for (auto& v : scores) v /= total;
  d.normalized = std::move(scores);
  return d;
}

Real kl_divergence(const ObjectnessDistribution& src, const ObjectnessDistribution& tgt) {
  if (src.normalized.size() != tgt.normalized.size()) {
    throw nn::ShapeError("KL needs distributions of equal length");
  }
  Real kl = 0;
  for (std::size_t i = 0; i < src.normalized.size(); ++i) {
    kl += src.normalized[i] * std::log(src.normalized[i] / tgt.normalized[i]);
  }
  return kl;
}

Real kl_objectness(const std::vector<Real>& source_scores, const std::vector<Real>& target_scores,
                   Real eps) {
  const std::size_t n = std::max(source_scores.size(), target_scores.size());
  if (n == 0) return 0.0;
  const Real kl = kl_divergence(ObjectnessDistribution::from_scores(source_scores, n, eps),
                                ObjectnessDistribution::from_scores(target_scores, n, eps));
  return std::clamp(kl, 0.0, 1.0);
}

Real hardness_score(const Tensor& dis_prob) {
  auto v = dis_prob.values();
  if (v.empty()) throw nn::ShapeError("hardness of an empty map");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<Real>(v.size());
}

Tensor loss_dis(const Tensor& prob_source, const Tensor& prob_target) {
  return domain_bce(prob_source, prob_target);
}

std::size_t dynamic_sample_count(DisState& state, Real hardness, Real kl) {
  if (state.n_min > state.n) throw nn::ContractError("N_min exceeds N");
  if (!(hardness >= 0 && hardness <= 1 && kl >= 0 && kl <= 1)) {
    throw nn::ContractError("hardness and kl must lie in [0, 1]");
  }
  const Real raw = std::floor(static_cast<Real>(state.n) * 0.5 * (hardness + (1.0 - kl)));
  state.n_final = std::clamp(static_cast<std::size_t>(raw), state.n_min, state.n);
  return state.n_final;
}

InstanceDiscriminator::InstanceDiscriminator(nn::ParameterSet& params, std::size_t roi_dim,
                                             std::size_t context_dim, Rng& rng)
    : fc1_(params, "d_ins.fc1", roi_dim + context_dim, 64, rng),
      fc2_(params, "d_ins.fc2", 64, 32, rng),
      fc3_(params, "d_ins.fc3", 32, 1, rng) {}

Tensor InstanceDiscriminator::forward(const Tensor& rois, const Tensor& context) const {
  const std::size_t n = rois.dim(0);
  Tensor x = nn::concat({rois, nn::repeat_rows(context, n)}, 1);
  Tensor p = nn::sigmoid(fc3_(nn::relu(fc2_(nn::relu(fc1_(x))))));
  return nn::reshape(p, {n});
}

Tensor loss_adv_ins(const Tensor& prob_source, const Tensor& prob_target) {
  return domain_bce(prob_source, prob_target);
}

}  // namespace cida::model
