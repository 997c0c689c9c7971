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
#include "cida/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <stdexcept>
#include <tuple>

namespace cida::eval {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Detection> rank_detections(std::vector<Detection> dets) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.image, a.box.x1, a.box.y1, a.box.x2, a.box.y2) <
           std::tie(b.image, b.box.x1, b.box.y1, b.box.x2, b.box.y2);
  });
  return dets;
}

double average_precision(const std::vector<Detection>& dets,
                         const std::vector<Annotation>& ground_truth, int cls,
                         double iou_thresh) {
  std::size_t npos = 0;
  std::vector<std::vector<bool>> matched(ground_truth.size());
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    matched[i].assign(ground_truth[i].size(), false);
    npos += static_cast<std::size_t>(
        std::count(ground_truth[i].classes.begin(), ground_truth[i].classes.end(), cls));
  }
  if (npos == 0) return 0.0;

  std::vector<Detection> mine;
  for (const auto& d : dets) {
    if (d.cls == cls) mine.push_back(d);
  }
  mine = rank_detections(std::move(mine));

  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (const auto& d : mine) {
    if (d.image >= ground_truth.size()) throw std::out_of_range("detection image index");
    const Annotation& gt = ground_truth[d.image];
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt.classes[j] != cls) continue;
      const double o = iou(d.box, gt.boxes[j]);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    if (best >= iou_thresh && !matched[d.image][best_j]) {
      matched[d.image][best_j] = true;
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  double ap = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    double p = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      if (recall[i] >= t) p = std::max(p, precision[i]);
    }
    ap += p / 11.0;
  }
  return ap;
}

double recall_rate(const std::vector<Detection>& image_dets, const Annotation& gt,
                   double iou_thresh) {
  if (gt.size() == 0) return 1.0;
  std::vector<bool> matched(gt.size(), false);
  for (const auto& d : rank_detections(image_dets)) {
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt.classes[j] != d.cls) continue;
      const double o = iou(d.box, gt.boxes[j]);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    if (best >= iou_thresh) matched[best_j] = true;
  }
  return static_cast<double>(std::count(matched.begin(), matched.end(), true)) /
         static_cast<double>(gt.size());
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least two points");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string EvalResult::to_json() const {
  nlohmann::json j;
  j["per_class_ap"] = per_class_ap;
  j["map"] = map;
  j["per_image_recall"] = per_image_recall;
  j["num_detections"] = num_detections;
  j["num_ground_truth"] = num_ground_truth;
  return j.dump(2);
}

EvalResult evaluate(const std::vector<Detection>& dets, const std::vector<Annotation>& gt,
                    int num_classes, double iou_thresh) {
  EvalResult r;
  r.num_detections = dets.size();
  int counted = 0;
  double total = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double ap = average_precision(dets, gt, c, iou_thresh);
    r.per_class_ap.push_back(ap);
    bool present = false;
    for (const auto& a : gt) {
      present = present || std::count(a.classes.begin(), a.classes.end(), c) > 0;
    }
    if (present) {
      total += ap;
      ++counted;
    }
  }
  r.map = counted ? total / counted : 0.0;
  std::vector<std::vector<Detection>> by_image(gt.size());
  for (const auto& d : dets) by_image.at(d.image).push_back(d);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    r.num_ground_truth += gt[i].size();
    r.per_image_recall.push_back(recall_rate(by_image[i], gt[i], iou_thresh));
  }
  return r;
}

}  // namespace cida::eval
