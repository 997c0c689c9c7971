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
#include "cida/model/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cida::model {

Detector::Detector(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  Rng rng(seed);
  const auto& widths = cfg.backbone.widths;
  const std::size_t k = cfg.anchors.per_location();
  backbone_ = Backbone(params_, cfg.backbone, rng);
  fusion_ = MultiScaleFusion(params_, widths, rng);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    d_img_.emplace_back(params_, "d_img" + std::to_string(l + 1), widths[l], cfg.disc_hidden, rng);
  }
  d_fus_ = PixelDiscriminator(params_, "d_fus", widths.back(), cfg.disc_hidden, rng);
  rpn_ = RpnHead(params_, widths.back(), cfg.rpn_hidden, k, rng);
  d_rpn_ = AnchorDiscriminator(params_, cfg.rpn_hidden, k, rng);
  d_dis_ = PixelDiscriminator(params_, "d_dis", widths.back(), cfg.disc_hidden, rng);
  head_ = DetectionHead(params_, roi_dim(), cfg.head_hidden, cfg.num_classes, rng);
  d_ins_ = InstanceDiscriminator(params_, roi_dim(), cfg.disc_hidden, rng);
}

std::size_t Detector::roi_dim() const {
  return cfg_.backbone.widths.back() * cfg_.roi_size * cfg_.roi_size;
}

ImagePass Detector::forward_image(const Tensor& image, const PassOptions& opt) const {
  ImagePass pass;
  pass.features = backbone_.extract_features(image);
  const FeatureMap& last = pass.features.back();
  if (opt.mua || opt.fusion) {
    pass.fused = fusion_.fuse(pass.features);
    pass.fus = d_fus_.forward(nn::gradient_reversal(pass.fused.data, {opt.grl_coefficient}));
    pass.attention = attention_from_probability(pass.fus.prob, cfg_.entropy);
  }
  pass.attended = opt.mua ? apply_attention(last, pass.attention, cfg_.attention) : last;
  pass.rpn = rpn_.forward(pass.attended.data);

  const std::size_t h = last.data.dim(1), w = last.data.dim(2);
  pass.anchors = generate_anchors(cfg_.anchors, h, w);
  auto decoded = decode_boxes(pass.anchors, pass.rpn.deltas.values(), image.dim(1), image.dim(2));
  auto o = pass.rpn.objectness.values();
  std::vector<Real> transferability;
  if (opt.trpn) {
    pass.p_rpn = d_rpn_.forward(nn::gradient_reversal(pass.rpn.feature, {opt.grl_coefficient}));
    transferability = proposal_transferability(pass.p_rpn.values(), cfg_.entropy.eps,
                                               cfg_.entropy.full_binary);
  }
  SelectConfig select = opt.select;
  select.transferable = opt.trpn;
  pass.proposals = select_top_n(
      make_proposals(std::move(decoded), {o.begin(), o.end()}, std::move(transferability)),
      select);
  return pass;
}

std::vector<PixelDiscriminator::Output> Detector::image_discriminators(
    const ImagePass& pass, Real grl_coefficient) const {
  std::vector<PixelDiscriminator::Output> out;
  for (std::size_t l = 0; l < d_img_.size(); ++l) {
    out.push_back(d_img_[l].forward(nn::gradient_reversal(pass.features[l].data, {grl_coefficient})));
  }
  return out;
}

Tensor Detector::context_vector(const ImagePass& pass, bool from_fusion) const {
  if (from_fusion) {
    if (!pass.fus.penultimate.defined()) throw nn::ContractError("fusion was not computed");
    return nn::global_avg_pool(pass.fus.penultimate).detach();
  }
  return nn::global_avg_pool(d_img_.back().forward(pass.features.back().data).penultimate).detach();
}

Tensor Detector::dis_probability(const ImagePass& pass) const {
  if (!pass.fused.data.defined()) throw nn::ContractError("fusion was not computed");
  return d_dis_.forward(pass.fused.data.detach()).prob;
}

Tensor Detector::pool(const ImagePass& pass, const std::vector<Box>& boxes) const {
  return roi_pool(pass.attended, boxes, backbone_.stride(), cfg_.roi_size);
}

std::vector<eval::Detection> infer(const Detector& model, const Tensor& image,
                                   const InferOptions& opt) {
  PassOptions pass_opt;
  pass_opt.mua = opt.mua;
  pass_opt.trpn = opt.trpn;
  pass_opt.fusion = opt.mua;
  pass_opt.select.top_n = opt.top_n;
  pass_opt.select.nms_threshold = opt.rpn_nms;
  ImagePass pass = model.forward_image(image, pass_opt);
  const auto boxes = pass.proposals.kept_boxes();
  if (boxes.empty()) return {};

  const auto out = model.head().forward(model.pool(pass, boxes).detach());
  const Tensor softmax = nn::softmax(out.logits);
  const auto probs = softmax.values();
  const auto deltas = out.deltas.values();
  const int num_classes = model.head().num_classes();
  const std::size_t n = boxes.size(), width = out.deltas.dim(1);

  std::vector<eval::Detection> all;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<Box> cls_boxes;
    std::vector<Real> scores;
    for (std::size_t i = 0; i < n; ++i) {
      const Real s = probs[i * static_cast<std::size_t>(num_classes + 1) + static_cast<std::size_t>(c) + 1];
      if (s <= opt.score_threshold) continue;
      std::array<Real, 4> d;
      for (std::size_t j = 0; j < 4; ++j) {
        d[j] = deltas[i * width + static_cast<std::size_t>(c) * 4 + j] * kBoxTargetStd[j];
      }
      Box b = clip_box(decode_box(boxes[i], d), image.dim(1), image.dim(2));
      if (b.width() <= 0 || b.height() <= 0) continue;
      cls_boxes.push_back(b);
      scores.push_back(s);
    }
    for (auto k : nms(cls_boxes, scores, opt.nms_threshold)) {
      all.push_back({0, c, scores[k], cls_boxes[k]});
    }
  }
  all = eval::rank_detections(std::move(all));
  if (all.size() > opt.max_detections) all.resize(opt.max_detections);
  return all;
}

}  // namespace cida::model
