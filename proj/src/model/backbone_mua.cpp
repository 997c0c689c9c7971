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
#include "cida/model/backbone_mua.hpp"

#include <string>

namespace cida::model {

Backbone::Backbone(nn::ParameterSet& params, const BackboneConfig& cfg, Rng& rng)
    : widths_(cfg.widths) {
  if (widths_.empty()) throw nn::ShapeError("backbone needs at least one stage");
  std::size_t in = 3;
  for (std::size_t l = 0; l < widths_.size(); ++l) {
    const std::string name = "backbone.stage" + std::to_string(l + 1);
    down_.emplace_back(params, name + ".down", in, widths_[l], 3, 2, 1, rng);
    refine_.emplace_back(params, name + ".refine", widths_[l], widths_[l], 3, 1, 1, rng);
    in = widths_[l];
  }
}

std::vector<FeatureMap> Backbone::extract_features(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw nn::ShapeError("backbone expects a 3 x H x W image, got " + nn::shape_str(image.shape()));
  }
  if (image.dim(1) < stride() || image.dim(2) < stride()) {
    throw nn::ShapeError("image " + nn::shape_str(image.shape()) + " is smaller than the total stride " +
                         std::to_string(stride()));
  }
  std::vector<FeatureMap> out;
  Tensor x = image;
  for (std::size_t l = 0; l < widths_.size(); ++l) {
    x = nn::relu(down_[l](x));
    x = nn::relu(refine_[l](x));
    out.push_back({l + 1, x});
  }
  return out;
}

MultiScaleFusion::MultiScaleFusion(nn::ParameterSet& params, const std::vector<std::size_t>& widths,
                                   Rng& rng)
    : layers_(widths.size()) {
  std::size_t total = 0;
  for (auto w : widths) total += w;
  embed_ = Conv2d(params, "fusion.embed", total, widths.back(), 1, 1, 0, rng);
}

FusedFeature MultiScaleFusion::fuse(const std::vector<FeatureMap>& features) const {
  if (features.size() != layers_) {
    throw nn::ShapeError("fusion expects " + std::to_string(layers_) + " feature maps, got " +
                         std::to_string(features.size()));
  }
  for (std::size_t l = 0; l < features.size(); ++l) {
    if (features[l].layer != l + 1) throw nn::ShapeError("feature maps must be ordered by layer");
  }
  const Tensor& last = features.back().data;
  std::vector<Tensor> parts;
  for (const auto& f : features) {
    parts.push_back(f.layer == layers_ ? f.data
                                       : nn::bilinear_resize(f.data, last.dim(1), last.dim(2)));
  }
  return {embed_(nn::concat(parts, 0))};
}

PixelDiscriminator::PixelDiscriminator(nn::ParameterSet& params, const std::string& name,
                                       std::size_t in, std::size_t hidden, Rng& rng)
    : hidden_(hidden),
      c1_(params, name + ".conv1", in, hidden, 3, 1, 1, rng),
      c2_(params, name + ".conv2", hidden, hidden, 1, 1, 0, rng),
      c3_(params, name + ".conv3", hidden, 1, 1, 1, 0, rng) {}

PixelDiscriminator::Output PixelDiscriminator::forward(const Tensor& x) const {
  Tensor h = nn::relu(c2_(nn::relu(c1_(x))));
  Tensor p = nn::sigmoid(c3_(h));
  return {nn::reshape(p, {x.dim(1), x.dim(2)}), h};
}

Tensor pixel_entropy(const Tensor& prob, const EntropyConfig& cfg) {
  return nn::pixel_entropy(prob, cfg.eps, cfg.full_binary);
}

AttentionMap attention_from_probability(const Tensor& fus_prob, const EntropyConfig& cfg) {
  return {pixel_entropy(fus_prob.detach(), cfg)};
}

AttentionMap compute_mua(const FusedFeature& fused, const PixelDiscriminator& d_fus,
                         const EntropyConfig& cfg) {
  return attention_from_probability(d_fus.forward(fused.data).prob, cfg);
}

FeatureMap apply_attention(const FeatureMap& last, const AttentionMap& attention,
                           AttentionMode mode) {
  Tensor e = attention.data;
  if (mode == AttentionMode::kResidual) e = nn::add_scalar(e, 1.0);
  return {last.layer, nn::mul_channels(last.data, e)};
}

Tensor loss_adv_fus(const Tensor& prob_source, const Tensor& prob_target) {
  Tensor total;
  if (prob_source.defined()) total = nn::mean(nn::square(prob_source));
  if (prob_target.defined()) {
    Tensor t = nn::mean(nn::square(nn::add_scalar(nn::scale(prob_target, -1.0), 1.0)));
    total = total.defined() ? nn::add(total, t) : t;
  }
  if (!total.defined()) throw nn::ContractError("loss_adv_fus needs at least one domain");
  return total;
}

Tensor loss_adv_img(const std::vector<std::vector<Tensor>>& probs_per_image,
                    const std::vector<data::Domain>& domains) {
  if (probs_per_image.empty() || probs_per_image.size() != domains.size()) {
    throw nn::ContractError("loss_adv_img: one domain label per image required");
  }
  Tensor total;
  for (std::size_t i = 0; i < probs_per_image.size(); ++i) {
    const auto& layers = probs_per_image[i];
    if (layers.empty()) throw nn::ContractError("loss_adv_img: image without layers");
    for (const auto& p : layers) {
      Tensor term = nn::scale(nn::binary_cross_entropy(p, data::domain_target(domains[i])),
                              1.0 / static_cast<Real>(layers.size() * probs_per_image.size()));
      total = total.defined() ? nn::add(total, term) : term;
    }
  }
  return total;
}

}  // namespace cida::model
