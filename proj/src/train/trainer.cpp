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
#include "cida/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cida/nn/optim.hpp"

namespace cida::train {

using model::Box;
using nn::Tensor;

namespace {

Tensor flip_image(const Tensor& image) {
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  auto v = image.values();
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out[(k * h + y) * w + x] = v[(k * h + y) * w + (w - 1 - x)];
    }
  }
  return Tensor::constant(image.shape(), std::move(out));
}

data::Annotation flip_annotation(data::Annotation a, std::size_t width) {
  const double w = static_cast<double>(width);
  for (auto& b : a.boxes) b = {w - b.x2, b.y1, w - b.x1, b.y2};
  return a;
}

std::vector<double> ranked_objectness(const model::ProposalSet& p) {
  auto v = p.kept_objectness();
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

void clip_gradients(nn::ParameterSet& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params.all()) {
    for (double g : p->gradient()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double f = max_norm / norm;
  for (const auto& p : params.all()) {
    for (double& g : p->gradient()) g *= f;
  }
}

/// Detection losses of one labeled image given its forward pass.
struct Supervised {
  Tensor rpn, reg, cls;
};

Supervised supervised_losses(const model::Detector& model, const model::ImagePass& pass,
                             const data::Annotation& gt, const Config& cfg, model::Rng& rng) {
  model::RpnTargetConfig rt;
  rt.batch_size = cfg.rpn_batch;
  auto targets = model::assign_rpn_targets(pass.anchors, gt.boxes, rt, rng);
  auto rpn = model::rpn_loss(pass.rpn.objectness, pass.rpn.deltas, targets);

  model::ProposalLabelConfig lc;
  lc.fg_iou = cfg.fg_iou;
  lc.bg_iou = cfg.bg_iou;
  lc.batch_size = cfg.roi_batch;
  auto rois = model::label_proposals(pass.proposals.kept_boxes(), gt, lc, rng);
  Supervised out{nn::add(rpn.objectness, rpn.regression), Tensor::scalar(0), Tensor::scalar(0)};
  if (rois.size() > 0) {
    auto det = model::detection_losses(model.head().forward(model.pool(pass, rois.boxes)), rois);
    out.reg = det.reg;
    out.cls = det.cls;
  }
  return out;
}

Tensor instance_probabilities(const model::Detector& model, const model::ImagePass& pass,
                              const std::vector<Box>& boxes, const Tensor& context, double grl) {
  Tensor pooled = model.pool(pass, boxes);
  Tensor flat = nn::reshape(pooled, {boxes.size(), pooled.numel() / boxes.size()});
  return model.d_ins().forward(nn::gradient_reversal(flat, {grl}), context);
}

std::string dump_terms(const LossBundle& l) {
  std::ostringstream s;
  s << "l_rpn=" << l.l_rpn << " l_reg=" << l.l_reg << " l_cls=" << l.l_cls << " l_dis=" << l.l_dis
    << " l_adv_img=" << l.l_adv_img << " l_adv_fus=" << l.l_adv_fus
    << " l_adv_rpn=" << l.l_adv_rpn << " l_adv_ins=" << l.l_adv_ins << " lambda=" << l.lambda;
  return s.str();
}

}  // namespace

std::string StepRecord::to_json() const {
  nlohmann::json j;
  j["iteration"] = iteration;
  j["l_rpn"] = losses.l_rpn;
  j["l_reg"] = losses.l_reg;
  j["l_cls"] = losses.l_cls;
  j["l_dis"] = losses.l_dis;
  j["l_adv_img"] = losses.l_adv_img;
  j["l_adv_fus"] = losses.l_adv_fus;
  j["l_adv_rpn"] = losses.l_adv_rpn;
  j["l_adv_ins"] = losses.l_adv_ins;
  j["lambda"] = losses.lambda;
  j["total"] = total;
  j["lr"] = lr;
  j["hardness"] = hardness;
  j["kl"] = kl;
  j["n_final"] = n_final;
  return j.dump();
}

double learning_rate(const Config& cfg, std::size_t iteration) {
  const auto drop = static_cast<std::size_t>(
      std::llround(cfg.lr_drop_fraction * static_cast<double>(cfg.iterations)));
  return iteration < drop ? cfg.lr : cfg.lr * cfg.lr_decay;
}

Trainer::Trainer(const Config& cfg, model::Detector& model)
    : cfg_(cfg), model_(model), rng_(cfg.seed ^ 0x5DEECE66DULL) {
  cfg_.validate();
  dis_.n = cfg.top_n;
  dis_.n_min = cfg.n_min;
  dis_.n_final = cfg.top_n;
}

StepRecord Trainer::train_step(const data::AnnotatedImage& source_in,
                               const data::UnlabeledImage& target_in,
                               const data::Annotation* target_labels) {
  if (cfg_.oracle && target_labels == nullptr) {
    throw nn::ContractError("oracle training needs target labels");
  }
  data::AnnotatedImage source = source_in;
  data::UnlabeledImage target = target_in;
  data::Annotation target_gt = target_labels ? *target_labels : data::Annotation{};
  if (cfg_.hflip) {
    std::bernoulli_distribution coin(0.5);
    if (coin(rng_)) {
      source.pixels = flip_image(source.pixels);
      source.objects = flip_annotation(source.objects, source.pixels.dim(2));
    }
    if (coin(rng_)) {
      target.pixels = flip_image(target.pixels);
      target_gt = flip_annotation(target_gt, target.pixels.dim(2));
    }
  }

  const bool adapt = cfg_.adapt && !cfg_.oracle;
  const bool mua = adapt && cfg_.mua, trpn = adapt && cfg_.trpn, dis = adapt && cfg_.dis;
  const bool adversarial = adapt && include_adversarial_;
  model::PassOptions opt;
  opt.mua = mua;
  opt.trpn = trpn;
  opt.fusion = mua || dis;
  opt.select.top_n = cfg_.top_n;
  opt.select.nms_threshold = cfg_.rpn_nms;

  StepRecord rec;
  rec.iteration = iteration_;
  rec.lr = learning_rate(cfg_, iteration_);
  LossBundle& l = rec.losses;
  l.lambda = cfg_.lambda;

  auto sp = model_.forward_image(source.pixels, opt);
  const bool use_target = adapt || cfg_.oracle;
  model::ImagePass tp;
  if (use_target) tp = model_.forward_image(target.pixels, opt);

  auto sup = supervised_losses(model_, sp, source.objects, cfg_, rng_);
  Tensor det = nn::add(nn::add(sup.rpn, sup.reg), sup.cls);
  if (cfg_.oracle) {
    auto tsup = supervised_losses(model_, tp, target_gt, cfg_, rng_);
    sup = {nn::scale(nn::add(sup.rpn, tsup.rpn), 0.5), nn::scale(nn::add(sup.reg, tsup.reg), 0.5),
           nn::scale(nn::add(sup.cls, tsup.cls), 0.5)};
    det = nn::add(nn::add(sup.rpn, sup.reg), sup.cls);
  }
  l.l_rpn = sup.rpn.item();
  l.l_reg = sup.reg.item();
  l.l_cls = sup.cls.item();
  Tensor total = det;

  std::vector<Box> target_instances = tp.proposals.kept_boxes();
  rec.n_final = target_instances.size();
  if (dis) {
    Tensor ps = model_.dis_probability(sp), pt = model_.dis_probability(tp);
    Tensor ldis = model::loss_dis(ps, pt);
    l.l_dis = ldis.item();
    total = nn::add(total, ldis);
    rec.hardness = model::hardness_score(pt);
    rec.kl = model::kl_objectness(ranked_objectness(sp.proposals), ranked_objectness(tp.proposals));
    rec.n_final = model::dynamic_sample_count(dis_, rec.hardness, rec.kl);
    if (target_instances.size() > rec.n_final) target_instances.resize(rec.n_final);
  }

  if (adversarial) {
    const double grl = 1.0;
    std::vector<std::vector<Tensor>> img_probs(2);
    for (const auto& o : model_.image_discriminators(sp, grl)) img_probs[0].push_back(o.prob);
    for (const auto& o : model_.image_discriminators(tp, grl)) img_probs[1].push_back(o.prob);
    Tensor adv = model::loss_adv_img(img_probs, {data::Domain::kSource, data::Domain::kTarget});
    l.l_adv_img = adv.item();
    if (mua) {
      Tensor t = model::loss_adv_fus(sp.fus.prob, tp.fus.prob);
      l.l_adv_fus = t.item();
      adv = nn::add(adv, t);
    }
    if (trpn) {
      Tensor t = model::loss_adv_rpn(sp.p_rpn, tp.p_rpn);
      l.l_adv_rpn = t.item();
      adv = nn::add(adv, t);
    }
    const auto source_instances = sp.proposals.kept_boxes();
    if (!source_instances.empty() || !target_instances.empty()) {
      Tensor ps, pt;
      if (!source_instances.empty()) {
        ps = instance_probabilities(model_, sp, source_instances, model_.context_vector(sp, mua), grl);
      }
      if (!target_instances.empty()) {
        pt = instance_probabilities(model_, tp, target_instances, model_.context_vector(tp, mua), grl);
      }
      Tensor t = model::loss_adv_ins(ps, pt);
      l.l_adv_ins = t.item();
      adv = nn::add(adv, t);
    }
    total = nn::add(total, nn::scale(adv, cfg_.lambda));
  }

  rec.total = total.item();
  if (!std::isfinite(rec.total)) {
    throw NumericAbort("non-finite loss at iteration " + std::to_string(iteration_) + ": " +
                       dump_terms(l));
  }
  model_.params().zero_grad();
  try {
    nn::backprop(total);
  } catch (const nn::NumericError& e) {
    throw NumericAbort(std::string(e.what()) + " at iteration " + std::to_string(iteration_) +
                       ": " + dump_terms(l));
  }
  if (cfg_.grad_clip > 0) clip_gradients(model_.params(), cfg_.grad_clip);
  if (cfg_.dis_lr_scale != 1.0) {
    for (auto& p : model_.params().all()) {
      if (p->name().rfind("d_dis", 0) != 0) continue;
      for (auto& g : p->gradient()) g *= cfg_.dis_lr_scale;
    }
  }
  nn::sgd_momentum_step(model_.params(), rec.lr, cfg_.momentum);
  ++iteration_;
  return rec;
}

std::vector<StepRecord> run_training(const Config& cfg, model::Detector& model,
                                     const TrainData& data, const TrainOutputs& outputs) {
  if (data.source == nullptr || data.source->empty()) {
    throw nn::ContractError("training needs source images");
  }
  const bool needs_target = (cfg.adapt || cfg.oracle);
  if (needs_target && (data.target == nullptr || data.target->empty())) {
    throw nn::ContractError("adaptation needs target images");
  }
  if (cfg.oracle && (data.target_labels == nullptr ||
                     data.target_labels->size() != data.target->size())) {
    throw nn::ContractError("oracle training needs one label set per target image");
  }
  Trainer trainer(cfg, model);
  model::Rng order_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 17);
  const std::size_t ns = data.source->size();
  const std::size_t nt = needs_target ? data.target->size() : 1;
  std::vector<std::size_t> sperm(ns), tperm(nt);
  std::iota(sperm.begin(), sperm.end(), 0);
  std::iota(tperm.begin(), tperm.end(), 0);
  data::UnlabeledImage blank;
  std::vector<StepRecord> log;
  log.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    if (it % ns == 0) std::shuffle(sperm.begin(), sperm.end(), order_rng);
    if (it % nt == 0) std::shuffle(tperm.begin(), tperm.end(), order_rng);
    const auto& src = (*data.source)[sperm[it % ns]];
    const std::size_t ti = tperm[it % nt];
    const auto& tgt = needs_target ? (*data.target)[ti] : blank;
    const data::Annotation* labels = cfg.oracle ? &(*data.target_labels)[ti] : nullptr;
    auto rec = trainer.train_step(src, tgt, labels);
    if (outputs.log) *outputs.log << rec.to_json() << '\n';
    if (outputs.on_step) outputs.on_step(rec);
    log.push_back(rec);
    if (!outputs.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        (it + 1) % cfg.checkpoint_every == 0) {
      nn::write_checkpoint(outputs.checkpoint_path, make_checkpoint(model, cfg, it + 1));
    }
  }
  if (outputs.log) outputs.log->flush();
  if (!outputs.checkpoint_path.empty()) {
    nn::write_checkpoint(outputs.checkpoint_path, make_checkpoint(model, cfg, cfg.iterations));
  }
  return log;
}

nn::CheckpointData make_checkpoint(const model::Detector& model, const Config& cfg,
                                   std::size_t iteration) {
  return nn::snapshot(model.params(), iteration, to_text(cfg));
}

model::Detector load_model(const nn::CheckpointData& ckpt, Config* cfg_out) {
  Config cfg = parse_config_text(ckpt.config, "<checkpoint>");
  model::Detector model(cfg.model_config(), cfg.seed);
  nn::restore(ckpt, model.params());
  if (cfg_out) *cfg_out = cfg;
  return model;
}

}  // namespace cida::train
