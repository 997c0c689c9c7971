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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cida/data/types.hpp"

namespace cida::data {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Appearance-only shift standing in for weather degradation:
/// blur, then out = 0.5 + contrast_gain * (in - 0.5) + brightness_delta,
/// then additive Gaussian noise, then clamp to [0, 1].
struct ShiftParams {
  double blur_sigma = 0.0;
  double brightness_delta = 0.0;
  double contrast_gain = 1.0;
  double noise_std = 0.0;

  void validate() const;
};

/// The default "foggy" target shift.
ShiftParams default_target_shift();

struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  int num_classes = 3;  // disc, square, triangle
  std::size_t min_objects = 1;
  std::size_t max_objects = 5;
  std::size_t min_size = 6;
  std::size_t max_size = 28;
  double max_pair_iou = 0.3;
  std::size_t max_retries = 200;
  // Object colors drawn around a per-class hue rather than uniformly.
  bool class_palette = true;
  double palette_jitter = 0.15;
  ShiftParams target_shift = default_target_shift();

  void validate() const;
};

inline constexpr const char* kClassNames[] = {"disc", "square", "triangle"};

/// Deterministic in (seed, domain, cfg). A target scene is the source scene
/// for the same seed with `apply_domain_shift` applied.
AnnotatedImage generate_scene(std::uint64_t seed, Domain domain, const SceneConfig& cfg = {});

nn::Tensor apply_domain_shift(const nn::Tensor& image, const ShiftParams& shift,
                              std::uint64_t seed);

/// Rounds every pixel to the nearest multiple of 1/255.
nn::Tensor quantize_8bit(const nn::Tensor& image);

struct SplitConfig {
  std::uint64_t seed = 0;
  std::size_t source_train = 500;
  std::size_t target_train = 500;
  std::size_t target_test = 200;
  SceneConfig scene;
};

/// Labeled source images, unlabeled target images, and the held-out target
/// labels. Pixels are 8-bit quantized so they survive a disk round trip.
struct DatasetSplits {
  std::vector<AnnotatedImage> source_train;
  TargetSplit target_train;
  TargetSplit target_test;
};

DatasetSplits build_splits(const SplitConfig& cfg);

}  // namespace cida::data
