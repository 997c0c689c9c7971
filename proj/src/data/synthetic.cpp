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
#include "cida/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "cida/eval/metrics.hpp"

namespace cida::data {

namespace {

using Rng = std::mt19937_64;
using Color = std::array<double, 3>;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

constexpr Color kPalette[] = {{0.9, 0.2, 0.15}, {0.15, 0.8, 0.25}, {0.2, 0.3, 0.95}};

double color_distance(const Color& a, const Color& b) {
  double s = 0;
  for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

bool inside(int cls, const Box& b, double px, double py) {
  const double cx = 0.5 * (b.x1 + b.x2), cy = 0.5 * (b.y1 + b.y2);
  const double hw = 0.5 * b.width(), hh = 0.5 * b.height();
  switch (cls) {
    case 0: {
      const double dx = (px - cx) / hw, dy = (py - cy) / hh;
      return dx * dx + dy * dy <= 1.0;
    }
    case 1:
      return px >= b.x1 && px <= b.x2 && py >= b.y1 && py <= b.y2;
    default:
      if (py < b.y1 || py > b.y2) return false;
      return std::abs(px - cx) <= hw * (py - b.y1) / b.height();
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * static_cast<std::size_t>(radius) + 1);
  double s = 0;
  for (int i = -radius; i <= radius; ++i) {
    s += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  }
  for (auto& v : k) v /= s;
  return k;
}

}  // namespace

void ShiftParams::validate() const {
  if (!(blur_sigma >= 0.0)) throw std::invalid_argument("blur_sigma must be >= 0");
  if (!(contrast_gain > 0.0)) throw std::invalid_argument("contrast_gain must be > 0");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  if (!std::isfinite(brightness_delta)) throw std::invalid_argument("brightness_delta must be finite");
}

ShiftParams default_target_shift() {
  ShiftParams p;
  p.blur_sigma = 0.8;
  p.brightness_delta = 0.1;
  p.contrast_gain = 0.6;
  p.noise_std = 0.05;
  return p;
}

void SceneConfig::validate() const {
  if (height < 8 || width < 8) throw std::invalid_argument("scene must be at least 8x8");
  if (num_classes < 1 || num_classes > 3) throw std::invalid_argument("num_classes must be 1..3");
  if (min_objects > max_objects) throw std::invalid_argument("min_objects > max_objects");
  if (min_size < 2 || min_size > max_size) throw std::invalid_argument("bad object size range");
  if (max_size > std::min(height, width)) throw std::invalid_argument("max_size exceeds image");
  if (!(palette_jitter >= 0.0)) throw std::invalid_argument("palette_jitter must be >= 0");
  target_shift.validate();
}

AnnotatedImage generate_scene(std::uint64_t seed, Domain domain, const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0));
  const std::size_t h = cfg.height, w = cfg.width;

  Color base, grad_x, grad_y;
  for (int c = 0; c < 3; ++c) {
    base[c] = uniform(rng, 0.25, 0.75);
    grad_x[c] = uniform(rng, -0.2, 0.2);
    grad_y[c] = uniform(rng, -0.2, 0.2);
  }
  std::vector<double> px(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(w) - 0.5;
      const double v = static_cast<double>(y) / static_cast<double>(h) - 0.5;
      for (std::size_t c = 0; c < 3; ++c) {
        const double t = uniform(rng, -0.03, 0.03);
        px[(c * h + y) * w + x] = std::clamp(base[c] + grad_x[c] * u + grad_y[c] * v + t, 0.0, 1.0);
      }
    }
  }

  AnnotatedImage out;
  out.domain = domain;
  const std::size_t count = uniform_int(rng, cfg.min_objects, cfg.max_objects);
  for (std::size_t k = 0; k < count; ++k) {
    Box box;
    bool placed = false;
    for (std::size_t attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      const std::size_t bw = uniform_int(rng, cfg.min_size, cfg.max_size);
      const std::size_t lo = std::max(cfg.min_size, (bw + 1) / 2);
      const std::size_t hi = std::min(cfg.max_size, 2 * bw);
      const std::size_t bh = uniform_int(rng, lo, hi);
      const auto x1 = static_cast<double>(uniform_int(rng, 0, w - bw));
      const auto y1 = static_cast<double>(uniform_int(rng, 0, h - bh));
      box = {x1, y1, x1 + static_cast<double>(bw), y1 + static_cast<double>(bh)};
      placed = std::all_of(out.objects.boxes.begin(), out.objects.boxes.end(),
                           [&](const Box& o) { return eval::iou(o, box) < cfg.max_pair_iou; });
    }
    if (!placed) {
      throw GenerationError("could not place object " + std::to_string(k) + " for seed " +
                            std::to_string(seed));
    }
    const int cls = static_cast<int>(uniform_int(rng, 0, static_cast<std::size_t>(cfg.num_classes - 1)));

    const auto cx = static_cast<std::size_t>(0.5 * (box.x1 + box.x2));
    const auto cy = static_cast<std::size_t>(0.5 * (box.y1 + box.y2));
    Color bg{px[(0 * h + cy) * w + cx], px[(1 * h + cy) * w + cx], px[(2 * h + cy) * w + cx]};
    Color color{};
    for (int tries = 0; tries < 64; ++tries) {
      for (int c = 0; c < 3; ++c) {
        const double j = cfg.palette_jitter;
        color[c] = cfg.class_palette ? std::clamp(kPalette[cls][c] + uniform(rng, -j, j), 0.0, 1.0)
                                     : uniform(rng, 0.0, 1.0);
      }
      if (color_distance(color, bg) >= 0.45) break;
    }
    if (color_distance(color, bg) < 0.45) {
      for (int c = 0; c < 3; ++c) color[c] = bg[c] > 0.5 ? 0.05 : 0.95;
    }

    // 4x4 supersampled coverage.
    const auto ys = static_cast<std::size_t>(box.y1), ye = static_cast<std::size_t>(box.y2);
    const auto xs = static_cast<std::size_t>(box.x1), xe = static_cast<std::size_t>(box.x2);
    for (std::size_t y = ys; y < ye; ++y) {
      for (std::size_t x = xs; x < xe; ++x) {
        int hits = 0;
        for (int sy = 0; sy < 4; ++sy) {
          for (int sx = 0; sx < 4; ++sx) {
            hits += inside(cls, box, static_cast<double>(x) + (sx + 0.5) / 4.0,
                           static_cast<double>(y) + (sy + 0.5) / 4.0);
          }
        }
        const double a = hits / 16.0;
        for (std::size_t c = 0; c < 3; ++c) {
          double& p = px[(c * h + y) * w + x];
          p = (1.0 - a) * p + a * color[c];
        }
      }
    }
    out.objects.boxes.push_back(box);
    out.objects.classes.push_back(cls);
  }

  out.pixels = nn::Tensor::constant({3, h, w}, std::move(px));
  if (domain == Domain::kTarget) {
    out.pixels = apply_domain_shift(out.pixels, cfg.target_shift, mix_seed(seed, 1));
  }
  return out;
}

nn::Tensor apply_domain_shift(const nn::Tensor& image, const ShiftParams& shift,
                              std::uint64_t seed) {
  shift.validate();
  if (image.rank() != 3) throw nn::ShapeError("apply_domain_shift expects C x H x W");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<double> px(image.values().begin(), image.values().end());

  if (shift.blur_sigma > 0.0) {
    const auto k = gaussian_kernel(shift.blur_sigma);
    const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
    std::vector<double> tmp(px.size());
    const auto clampi = [](std::ptrdiff_t v, std::size_t n) {
      return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
    };
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          double s = 0;
          for (std::ptrdiff_t i = -r; i <= r; ++i) {
            s += k[static_cast<std::size_t>(i + r)] *
                 px[(ch * h + y) * w + clampi(static_cast<std::ptrdiff_t>(x) + i, w)];
          }
          tmp[(ch * h + y) * w + x] = s;
        }
      }
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          double s = 0;
          for (std::ptrdiff_t i = -r; i <= r; ++i) {
            s += k[static_cast<std::size_t>(i + r)] *
                 tmp[(ch * h + clampi(static_cast<std::ptrdiff_t>(y) + i, h)) * w + x];
          }
          px[(ch * h + y) * w + x] = s;
        }
      }
    }
  }

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const bool affine = shift.contrast_gain != 1.0 || shift.brightness_delta != 0.0;
  for (auto& p : px) {
    if (affine) p = 0.5 + shift.contrast_gain * (p - 0.5) + shift.brightness_delta;
    if (shift.noise_std > 0.0) p += shift.noise_std * noise(rng);
    p = std::clamp(p, 0.0, 1.0);
  }
  return nn::Tensor::constant(image.shape(), std::move(px));
}

nn::Tensor quantize_8bit(const nn::Tensor& image) {
  std::vector<double> px(image.values().begin(), image.values().end());
  for (auto& p : px) p = std::round(std::clamp(p, 0.0, 1.0) * 255.0) / 255.0;
  return nn::Tensor::constant(image.shape(), std::move(px));
}

DatasetSplits build_splits(const SplitConfig& cfg) {
  DatasetSplits out;
  const std::uint64_t base = cfg.seed * 10'000'000ull;
  for (std::size_t i = 0; i < cfg.source_train; ++i) {
    auto img = generate_scene(base + i, Domain::kSource, cfg.scene);
    img.pixels = quantize_8bit(img.pixels);
    out.source_train.push_back(std::move(img));
  }
  auto make_target = [&](std::uint64_t offset, std::size_t n) {
    std::vector<UnlabeledImage> images;
    std::vector<Annotation> labels;
    for (std::size_t i = 0; i < n; ++i) {
      auto img = generate_scene(base + offset + i, Domain::kTarget, cfg.scene);
      images.push_back({quantize_8bit(img.pixels), Domain::kTarget});
      labels.push_back(std::move(img.objects));
    }
    return TargetSplit(std::move(images), std::move(labels));
  };
  out.target_train = make_target(1'000'000, cfg.target_train);
  out.target_test = make_target(2'000'000, cfg.target_test);
  return out;
}

void validate_annotation(const Annotation& a, std::size_t height, std::size_t width,
                         int num_classes) {
  if (a.boxes.size() != a.classes.size()) {
    throw std::invalid_argument("boxes and classes differ in length");
  }
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    const Box& b = a.boxes[i];
    if (!(b.x1 < b.x2 && b.y1 < b.y2)) throw std::invalid_argument("degenerate box");
    if (b.x1 < 0 || b.y1 < 0 || b.x2 > static_cast<double>(width) ||
        b.y2 > static_cast<double>(height)) {
      throw std::invalid_argument("box outside image bounds");
    }
    if (a.classes[i] < 0 || a.classes[i] >= num_classes) {
      throw std::invalid_argument("class index out of range");
    }
  }
}

}  // namespace cida::data
