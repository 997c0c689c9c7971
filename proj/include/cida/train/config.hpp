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
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cida/data/synthetic.hpp"
#include "cida/model/detector.hpp"

namespace cida::train {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable of a run. Serialized as flat `key = value` lines; `#` starts
/// a comment. See `config_keys()` for the accepted keys.
struct Config {
  std::uint64_t seed = 0;

  // data
  std::size_t num_source = 500;
  std::size_t num_target = 500;
  std::size_t num_test = 200;
  data::ShiftParams shift = data::default_target_shift();

  // model
  std::vector<std::size_t> backbone_widths{16, 32, 64};
  std::size_t disc_hidden = 32;
  std::size_t rpn_hidden = 64;
  std::size_t head_hidden = 128;
  std::size_t roi_size = 7;
  std::string attention = "raw";
  bool full_binary_entropy = false;

  // variant
  bool adapt = true;
  bool mua = true;
  bool trpn = true;
  bool dis = true;
  bool oracle = false;

  // optimization
  std::size_t iterations = 2000;
  double lr = 2e-3;
  double lr_drop_fraction = 5.0 / 7.0;
  double lr_decay = 0.1;
  double momentum = 0.9;
  double lambda = 0.3;
  double grad_clip = 0.0;  // global norm; 0 disables
  double dis_lr_scale = 10.0;  // step multiplier for the hardness discriminator
  bool hflip = false;

  // proposals and sampling
  std::size_t top_n = 64;
  std::size_t n_min = 16;
  double rpn_nms = 0.7;
  std::size_t rpn_batch = 64;
  std::size_t roi_batch = 128;
  double fg_iou = 0.5;
  double bg_iou = 0.0;

  // inference
  double score_threshold = 0.05;
  double det_nms = 0.5;
  std::size_t max_detections = 100;

  // bookkeeping
  std::size_t checkpoint_every = 0;

  model::ModelConfig model_config() const;
  data::SplitConfig split_config() const;
  model::InferOptions infer_options() const;

  /// Throws ConfigError when a value is out of range.
  void validate() const;
};

const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Throws ConfigError on unknown keys
/// or malformed values.
void set_value(Config& cfg, const std::string& key, const std::string& value);
std::string get_value(const Config& cfg, const std::string& key);

/// Parses `key = value` text. Errors carry `origin:line`.
Config parse_config_text(const std::string& text, const std::string& origin = "<config>",
                         Config base = {});
/// Reads a config file (a missing path gives defaults when `path` is empty),
/// then applies `overrides` in order and validates.
Config load_config(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, std::string>>& overrides = {});

std::string to_text(const Config& cfg);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace cida::train
