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

#include "cida/nn/tensor.hpp"

namespace cida::data {

/// 0 for the labeled source domain, 1 for the unlabeled target domain.
enum class Domain : int { kSource = 0, kTarget = 1 };

inline double domain_target(Domain d) { return d == Domain::kTarget ? 1.0 : 0.0; }

/// Axis-aligned box in pixel units, x1 < x2 and y1 < y2.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  std::array<double, 4> as_array() const { return {x1, y1, x2, y2}; }
  friend bool operator==(const Box&, const Box&) = default;
};

struct Annotation {
  std::vector<Box> boxes;
  std::vector<int> classes;

  std::size_t size() const { return boxes.size(); }
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AnnotatedImage {
  nn::Tensor pixels;  // 3 x H x W in [0, 1]
  Annotation objects;
  Domain domain = Domain::kSource;
};

/// What training code may see of a target image.
struct UnlabeledImage {
  nn::Tensor pixels;
  Domain domain = Domain::kTarget;
};

/// Target images with their held-out labels. Training code receives only
/// `images`; labels are reachable through `eval_labels()` for evaluation.
class TargetSplit {
 public:
  TargetSplit() = default;
  TargetSplit(std::vector<UnlabeledImage> images, std::vector<Annotation> labels)
      : images_(std::move(images)), labels_(std::move(labels)) {}

  const std::vector<UnlabeledImage>& images() const { return images_; }
  std::size_t size() const { return images_.size(); }
  bool has_labels() const { return !labels_.empty() || images_.empty(); }
  const std::vector<Annotation>& eval_labels() const { return labels_; }

 private:
  std::vector<UnlabeledImage> images_;
  std::vector<Annotation> labels_;
};

/// Checks box ordering, image bounds and class range.
void validate_annotation(const Annotation& a, std::size_t height, std::size_t width,
                         int num_classes);

}  // namespace cida::data
