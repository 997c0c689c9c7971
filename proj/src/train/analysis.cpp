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
#include "cida/train/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cida::train {

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

model::PassOptions full_pass() {
  model::PassOptions opt;
  opt.mua = true;
  opt.trpn = true;
  opt.fusion = true;
  return opt;
}

}  // namespace

ModelEvaluation evaluate_model(const model::Detector& model,
                               const std::vector<data::UnlabeledImage>& images,
                               const std::vector<data::Annotation>& labels,
                               const model::InferOptions& opt, int num_classes) {
  if (images.size() != labels.size()) throw nn::ShapeError("one label set per image required");
  ModelEvaluation out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (auto d : model::infer(model, images[i].pixels, opt)) {
      d.image = i;
      out.detections.push_back(d);
    }
  }
  out.result = eval::evaluate(out.detections, labels, num_classes);
  return out;
}

std::string CorrelationReport::to_csv() const {
  std::string s = "image,hardness,recall\n";
  for (const auto& r : rows) {
    s += std::to_string(r.image) + ',' + num(r.hardness) + ',' + num(r.recall) + '\n';
  }
  return s;
}

CorrelationReport correlation_report(const model::Detector& model,
                                     const std::vector<data::UnlabeledImage>& images,
                                     const std::vector<data::Annotation>& labels,
                                     const model::InferOptions& opt) {
  if (images.size() != labels.size()) throw nn::ShapeError("one label set per image required");
  CorrelationReport rep;
  std::vector<double> h, r;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto pass = model.forward_image(images[i].pixels, full_pass());
    const double hardness = model::hardness_score(model.dis_probability(pass));
    const double recall = eval::recall_rate(model::infer(model, images[i].pixels, opt), labels[i]);
    rep.rows.push_back({i, hardness, recall});
    h.push_back(hardness);
    r.push_back(recall);
  }
  rep.coefficient = h.size() >= 2 ? eval::pearson(h, r) : 0.0;
  return rep;
}

std::string trajectory_csv(const std::vector<StepRecord>& log) {
  std::string s = "iteration,hardness,kl,n_final\n";
  for (const auto& r : log) {
    s += std::to_string(r.iteration) + ',' + num(r.hardness) + ',' + num(r.kl) + ',' +
         std::to_string(r.n_final) + '\n';
  }
  return s;
}

std::vector<StepRecord> read_training_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open training log " + path.string());
  std::vector<StepRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      StepRecord r;
      r.iteration = j.at("iteration").get<std::size_t>();
      r.losses.l_rpn = j.at("l_rpn");
      r.losses.l_reg = j.at("l_reg");
      r.losses.l_cls = j.at("l_cls");
      r.losses.l_dis = j.at("l_dis");
      r.losses.l_adv_img = j.at("l_adv_img");
      r.losses.l_adv_fus = j.at("l_adv_fus");
      r.losses.l_adv_rpn = j.at("l_adv_rpn");
      r.losses.l_adv_ins = j.at("l_adv_ins");
      r.losses.lambda = j.at("lambda");
      r.total = j.at("total");
      r.lr = j.at("lr");
      r.hardness = j.at("hardness");
      r.kl = j.at("kl");
      r.n_final = j.at("n_final").get<std::size_t>();
      out.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::string anchor_csv(const model::Detector& model, const nn::Tensor& image) {
  auto pass = model.forward_image(image, full_pass());
  const auto& p = pass.proposals;
  const auto& a = pass.anchors;
  const std::size_t hw = a.height * a.width;
  std::string s = "anchor,a,y,x,x1,y1,x2,y2,objectness,transferability,reweighted\n";
  for (std::size_t r = 0; r < p.size(); ++r) {
    const auto& b = a.boxes[r];
    s += std::to_string(r) + ',' + std::to_string(r / hw) + ',' + std::to_string((r % hw) / a.width) +
         ',' + std::to_string(r % a.width) + ',' + num(b.x1) + ',' + num(b.y1) + ',' + num(b.x2) +
         ',' + num(b.y2) + ',' + num(p.objectness[r]) + ',' + num(p.transferability[r]) + ',' +
         num(p.reweighted[r]) + '\n';
  }
  return s;
}

AttentionExport export_attention(const model::Detector& model, const nn::Tensor& image) {
  auto pass = model.forward_image(image, full_pass());
  const auto& e = pass.attention.data;
  const std::size_t h = e.dim(0), w = e.dim(1);
  AttentionExport out;
  auto v = e.values();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (x) out.csv += ',';
      out.csv += num(v[y * w + x]);
    }
    out.csv += '\n';
  }
  const std::size_t oh = image.dim(1), ow = image.dim(2);
  const nn::Tensor resized = nn::bilinear_resize(nn::reshape(e, {1, h, w}), oh, ow);
  const auto up = resized.values();
  out.pgm = "P5\n" + std::to_string(ow) + ' ' + std::to_string(oh) + "\n255\n";
  const double top = std::exp(-1.0);
  for (double x : up) {
    out.pgm.push_back(static_cast<char>(
        static_cast<unsigned char>(std::lround(std::clamp(x / top, 0.0, 1.0) * 255.0))));
  }
  return out;
}

}  // namespace cida::train
