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

#include <string>
#include <vector>

#include "cida/data/types.hpp"

namespace cida::eval {

using data::Annotation;
using data::Box;

double iou(const Box& a, const Box& b);

struct Detection {
  std::size_t image = 0;
  int cls = 0;
  double score = 0.0;
  Box box;
};

/// Detections sorted by descending score. Ties are broken by image index,
/// then lexicographic box order, then input order, so the result does not
/// depend on how the input was permuted.
std::vector<Detection> rank_detections(std::vector<Detection> dets);

/// VOC-2007 protocol: greedy matching in rank order (each ground truth
/// matched at most once, a hit on an already-matched ground truth counts as a
/// false positive), 11-point interpolated precision. Returns 0 when the class
/// has no ground truth.
double average_precision(const std::vector<Detection>& dets,
                         const std::vector<Annotation>& ground_truth, int cls,
                         double iou_thresh = 0.5);

/// Fraction of one image's ground truth matched by a same-class detection.
/// An image without ground truth has recall 1.
double recall_rate(const std::vector<Detection>& image_dets, const Annotation& gt,
                   double iou_thresh = 0.5);

/// Pearson correlation; 0 when either input has zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct EvalResult {
  std::vector<double> per_class_ap;
  double map = 0.0;  // unweighted mean over classes that have ground truth
  std::vector<double> per_image_recall;
  std::size_t num_detections = 0;
  std::size_t num_ground_truth = 0;

  std::string to_json() const;
};

EvalResult evaluate(const std::vector<Detection>& dets, const std::vector<Annotation>& gt,
                    int num_classes, double iou_thresh = 0.5);

}  // namespace cida::eval
