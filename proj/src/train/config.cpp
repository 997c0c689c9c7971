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
#include "cida/train/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace cida::train {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("invalid boolean '" + v + "' for " + key);
}

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

struct Field {
  std::function<void(Config&, const std::string&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

template <typename T>
Field number(T Config::*member) {
  return {[member](Config& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const Config& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field flag(bool Config::*member) {
  return {[member](Config& c, const std::string& k, const std::string& v) {
            c.*member = parse_bool(k, v);
          },
          [member](const Config& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field shift(double data::ShiftParams::*member) {
  return {[member](Config& c, const std::string& k, const std::string& v) {
            c.shift.*member = parse_number<double>(k, v);
          },
          [member](const Config& c) { return fmt(c.shift.*member); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["seed"] = number(&Config::seed);
    t["num_source"] = number(&Config::num_source);
    t["num_target"] = number(&Config::num_target);
    t["num_test"] = number(&Config::num_test);
    t["shift_blur"] = shift(&data::ShiftParams::blur_sigma);
    t["shift_brightness"] = shift(&data::ShiftParams::brightness_delta);
    t["shift_contrast"] = shift(&data::ShiftParams::contrast_gain);
    t["shift_noise"] = shift(&data::ShiftParams::noise_std);
    t["backbone_widths"] = {
        [](Config& c, const std::string& k, const std::string& v) {
          std::vector<std::size_t> w;
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) w.push_back(parse_number<std::size_t>(k, trim(item)));
          c.backbone_widths = w;
        },
        [](const Config& c) {
          std::string s;
          for (std::size_t i = 0; i < c.backbone_widths.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(c.backbone_widths[i]);
          }
          return s;
        }};
    t["disc_hidden"] = number(&Config::disc_hidden);
    t["rpn_hidden"] = number(&Config::rpn_hidden);
    t["head_hidden"] = number(&Config::head_hidden);
    t["roi_size"] = number(&Config::roi_size);
    t["attention"] = {[](Config& c, const std::string& k, const std::string& v) {
                        if (v != "raw" && v != "residual") {
                          throw ConfigError("invalid value '" + v + "' for " + k +
                                            " (expected raw or residual)");
                        }
                        c.attention = v;
                      },
                      [](const Config& c) { return c.attention; }};
    t["full_binary_entropy"] = flag(&Config::full_binary_entropy);
    t["adapt"] = flag(&Config::adapt);
    t["mua"] = flag(&Config::mua);
    t["trpn"] = flag(&Config::trpn);
    t["dis"] = flag(&Config::dis);
    t["oracle"] = flag(&Config::oracle);
    t["iterations"] = number(&Config::iterations);
    t["lr"] = number(&Config::lr);
    t["lr_drop_fraction"] = number(&Config::lr_drop_fraction);
    t["lr_decay"] = number(&Config::lr_decay);
    t["momentum"] = number(&Config::momentum);
    t["lambda"] = number(&Config::lambda);
    t["grad_clip"] = number(&Config::grad_clip);
    t["dis_lr_scale"] = number(&Config::dis_lr_scale);
    t["hflip"] = flag(&Config::hflip);
    t["top_n"] = number(&Config::top_n);
    t["n_min"] = number(&Config::n_min);
    t["rpn_nms"] = number(&Config::rpn_nms);
    t["rpn_batch"] = number(&Config::rpn_batch);
    t["roi_batch"] = number(&Config::roi_batch);
    t["fg_iou"] = number(&Config::fg_iou);
    t["bg_iou"] = number(&Config::bg_iou);
    t["score_threshold"] = number(&Config::score_threshold);
    t["det_nms"] = number(&Config::det_nms);
    t["max_detections"] = number(&Config::max_detections);
    t["checkpoint_every"] = number(&Config::checkpoint_every);
    return t;
  }();
  return table;
}

}  // namespace

model::ModelConfig Config::model_config() const {
  model::ModelConfig m;
  m.backbone.widths = backbone_widths;
  m.disc_hidden = disc_hidden;
  m.rpn_hidden = rpn_hidden;
  m.head_hidden = head_hidden;
  m.roi_size = roi_size;
  m.attention = attention == "residual" ? model::AttentionMode::kResidual
                                        : model::AttentionMode::kRaw;
  m.entropy.full_binary = full_binary_entropy;
  return m;
}

data::SplitConfig Config::split_config() const {
  data::SplitConfig s;
  s.seed = seed;
  s.source_train = num_source;
  s.target_train = num_target;
  s.target_test = num_test;
  s.scene.target_shift = shift;
  return s;
}

model::InferOptions Config::infer_options() const {
  model::InferOptions o;
  o.mua = adapt && mua;
  o.trpn = adapt && trpn;
  o.dis = adapt && dis;
  o.top_n = top_n;
  o.rpn_nms = rpn_nms;
  o.score_threshold = score_threshold;
  o.nms_threshold = det_nms;
  o.max_detections = max_detections;
  return o;
}

void Config::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(num_source > 0, "num_source must be positive");
  require(lr > 0, "lr must be positive");
  require(momentum >= 0 && momentum < 1, "momentum must lie in [0, 1)");
  require(lambda >= 0, "lambda must be nonnegative");
  require(lr_drop_fraction >= 0 && lr_drop_fraction <= 1, "lr_drop_fraction must lie in [0, 1]");
  require(lr_decay > 0, "lr_decay must be positive");
  require(grad_clip >= 0, "grad_clip must be nonnegative");
  require(dis_lr_scale > 0, "dis_lr_scale must be positive");
  require(!backbone_widths.empty(), "backbone_widths needs at least one stage");
  for (auto w : backbone_widths) require(w > 0, "backbone widths must be positive");
  require(disc_hidden > 0 && rpn_hidden > 0 && head_hidden > 0 && roi_size > 0,
          "layer widths must be positive");
  require(top_n > 0, "top_n must be positive");
  require(n_min <= top_n, "n_min must not exceed top_n");
  require(rpn_nms > 0 && rpn_nms < 1, "rpn_nms must lie in (0, 1)");
  require(det_nms > 0 && det_nms < 1, "det_nms must lie in (0, 1)");
  require(bg_iou >= 0 && bg_iou <= fg_iou && fg_iou <= 1, "need 0 <= bg_iou <= fg_iou <= 1");
  require(rpn_batch > 0 && roi_batch > 0, "sampling batch sizes must be positive");
  try {
    shift.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, field] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

void set_value(Config& cfg, const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(cfg, key, value);
}

std::string get_value(const Config& cfg, const std::string& key) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(cfg);
}

Config parse_config_text(const std::string& text, const std::string& origin, Config base) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    try {
      set_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return base;
}

Config load_config(const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, std::string>>& overrides) {
  Config cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = parse_config_text(ss.str(), path.string());
  }
  for (const auto& [k, v] : overrides) set_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::string format_double(double v) { return fmt(v); }

std::string to_text(const Config& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

}  // namespace cida::train
