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
#include "cida/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cida/data/dataset_io.hpp"
#include "cida/nn/checkpoint.hpp"

namespace cida::cli {

namespace fs = std::filesystem;

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> v = {
      {"source_only", false, false, false, false, false},
      {"baseline", true, false, false, false, false},
      {"mua", true, true, false, false, false},
      {"trpn", true, false, true, false, false},
      {"dis", true, false, false, true, false},
      {"mua_trpn", true, true, true, false, false},
      {"mua_dis", true, true, false, true, false},
      {"trpn_dis", true, false, true, true, false},
      {"full", true, true, true, true, false},
      {"oracle", false, false, false, false, true},
  };
  return v;
}

const Variant& find_variant(const std::string& name) {
  for (const auto& v : ablation_variants()) {
    if (v.name == name) return v;
  }
  throw train::ConfigError("unknown variant '" + name + "'");
}

train::Config apply_variant(train::Config cfg, const Variant& v) {
  cfg.adapt = v.adapt;
  cfg.mua = v.mua;
  cfg.trpn = v.trpn;
  cfg.dis = v.dis;
  cfg.oracle = v.oracle;
  return cfg;
}

data::DatasetSplits load_or_generate(const train::Config& cfg, const fs::path& data_dir) {
  if (data_dir.empty()) return data::build_splits(cfg.split_config());
  data::DatasetSplits s;
  s.source_train = data::read_dataset(data_dir / "source_train");
  if (cfg.oracle) {
    s.target_train = data::read_target_split(data_dir / "target_train");
  } else {
    s.target_train = data::TargetSplit(data::read_unlabeled(data_dir / "target_train"), {});
  }
  s.target_test = data::read_target_split(data_dir / "target_test");
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

RunResult train_and_evaluate(const train::Config& cfg, const data::DatasetSplits& splits,
                             const fs::path& out, model::Detector* model_out) {
  model::Detector model(cfg.model_config(), cfg.seed);
  train::TrainData data;
  data.source = &splits.source_train;
  data.target = &splits.target_train.images();
  if (cfg.oracle) data.target_labels = &splits.target_train.eval_labels();

  train::TrainOutputs outputs;
  std::ofstream log;
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(out / "config.txt", train::to_text(cfg));
    log.open(out / "train_log.jsonl", std::ios::trunc);
    if (!log) throw IoError("cannot write " + (out / "train_log.jsonl").string());
    outputs.log = &log;
    outputs.checkpoint_path = out / "model.ckpt";
  }
  RunResult r;
  r.log = train::run_training(cfg, model, data, outputs);
  auto ev = train::evaluate_model(model, splits.target_test.images(),
                                  splits.target_test.eval_labels(), cfg.infer_options());
  r.target_map = ev.result.map;
  if (!out.empty()) {
    write_text(out / "trajectory.csv", train::trajectory_csv(r.log));
    write_text(out / "eval.json", ev.result.to_json() + "\n");
  }
  if (model_out) *model_out = std::move(model);
  return r;
}

std::vector<AblationRow> run_ablation(const train::Config& base, const data::DatasetSplits& splits,
                                      const std::vector<std::string>& variants,
                                      const std::vector<std::uint64_t>& seeds, const fs::path& out,
                                      std::ostream* progress) {
  std::vector<AblationRow> rows;
  for (const auto& name : variants) {
    const Variant& v = find_variant(name);
    for (auto seed : seeds) {
      train::Config cfg = apply_variant(base, v);
      cfg.seed = seed;
      const fs::path dir = out.empty() ? fs::path() : out / (name + "-seed" + std::to_string(seed));
      auto r = train_and_evaluate(cfg, splits, dir);
      rows.push_back({name, seed, r.target_map});
      if (progress) *progress << name << " seed=" << seed << " map=" << fmt(r.target_map) << std::endl;
    }
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string s = "variant,seed,map\n";
  for (const auto& r : rows) s += r.variant + ',' + std::to_string(r.seed) + ',' + fmt(r.map) + '\n';
  return s;
}

std::string ablation_summary_csv(const std::vector<AblationRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    if (!acc.count(r.variant)) order.push_back(r.variant);
    acc[r.variant].first += r.map;
    acc[r.variant].second += 1;
  }
  std::string s = "variant,seeds,mean_map\n";
  for (const auto& name : order) {
    const auto& [sum, n] = acc[name];
    s += name + ',' + std::to_string(n) + ',' + fmt(sum / static_cast<double>(n)) + '\n';
  }
  return s;
}

fs::path default_run_dir(std::uint64_t seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%d-%H%M%S") << "-seed" << seed;
  return fs::path("runs") / s.str();
}

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<double> lambda;
  bool disable_mua = false, disable_trpn = false, disable_dis = false, oracle = false;

  std::vector<std::pair<std::string, std::string>> overrides() const {
    std::vector<std::pair<std::string, std::string>> o;
    if (seed) o.emplace_back("seed", std::to_string(*seed));
    if (iterations) o.emplace_back("iterations", std::to_string(*iterations));
    if (lambda) o.emplace_back("lambda", train::format_double(*lambda));
    if (disable_mua) o.emplace_back("mua", "false");
    if (disable_trpn) o.emplace_back("trpn", "false");
    if (disable_dis) o.emplace_back("dis", "false");
    if (oracle) o.emplace_back("oracle", "true");
    return o;
  }

  train::Config load() const {
    if (!config.empty() && !fs::exists(config)) throw IoError("config file not found: " + config);
    return train::load_config(config, overrides());
  }

  fs::path out_dir(std::uint64_t seed_value) const {
    return out.empty() ? default_run_dir(seed_value) : fs::path(out);
  }
};

void add_config_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "flat key = value config file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
}

void add_training_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--iterations", f.iterations, "training iterations");
  cmd->add_option("--lambda", f.lambda, "adversarial trade-off weight");
  cmd->add_flag("--oracle", f.oracle, "train with target supervision");
}

void add_variant_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_flag("--disable-mua", f.disable_mua, "turn off the uncertainty attention");
  cmd->add_flag("--disable-trpn", f.disable_trpn, "turn off transferable proposal filtering");
  cmd->add_flag("--disable-dis", f.disable_dis, "turn off dynamic instance sampling");
}

/// Checkpoint-backed commands: the run's config plus inference switches.
model::Detector load_checkpoint(const CommonFlags& f, train::Config& cfg) {
  if (f.checkpoint.empty()) throw train::ConfigError("--checkpoint is required");
  auto ckpt = nn::read_checkpoint(f.checkpoint);
  auto model = train::load_model(ckpt, &cfg);
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw IoError("config file not found: " + f.config);
    std::stringstream text;
    text << in.rdbuf();
    cfg = train::parse_config_text(text.str(), f.config, cfg);
  }
  if (f.disable_mua) cfg.mua = false;
  if (f.disable_trpn) cfg.trpn = false;
  if (f.disable_dis) cfg.dis = false;
  return model;
}

std::vector<data::UnlabeledImage> test_images(const train::Config& cfg, const std::string& dir,
                                              std::vector<data::Annotation>* labels) {
  if (dir.empty()) {
    auto s = data::build_splits(cfg.split_config());
    if (labels) *labels = s.target_test.eval_labels();
    return s.target_test.images();
  }
  auto split = data::read_target_split(fs::path(dir) / "target_test");
  if (labels) *labels = split.eval_labels();
  return split.images();
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kOk;
  } catch (const train::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const train::NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const nn::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const data::DatasetError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const nn::CheckpointError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::logic_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Cross-domain detector with uncertainty attention, transferable proposals and "
               "dynamic instance sampling"};
  app.require_subcommand(1);
  CommonFlags f;
  std::size_t num_seeds = 3;
  std::vector<std::string> variants;
  std::string log_path;
  std::size_t image_index = 0;

  auto* gen = app.add_subcommand("generate-data", "write the synthetic source/target splits");
  add_config_flags(gen, f);

  auto* trn = app.add_subcommand("train", "train one model");
  add_config_flags(trn, f);
  add_training_flags(trn, f);
  add_variant_flags(trn, f);
  trn->add_option("--data", f.data, "dataset root from generate-data (generated in memory if absent)");

  auto* evl = app.add_subcommand("evaluate", "score a checkpoint on the target test split");
  add_config_flags(evl, f);
  add_variant_flags(evl, f);
  evl->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  evl->add_option("--data", f.data, "dataset root");

  auto* abl = app.add_subcommand("ablate", "train every variant over several seeds");
  add_config_flags(abl, f);
  add_training_flags(abl, f);
  abl->add_option("--data", f.data, "dataset root");
  abl->add_option("--seeds", num_seeds, "number of consecutive seeds starting at --seed");
  abl->add_option("--variants", variants, "subset of variants (default: all)")->delimiter(',');

  auto* ana = app.add_subcommand("analyze", "correlation, trajectory and anchor dumps");
  add_config_flags(ana, f);
  add_variant_flags(ana, f);
  ana->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  ana->add_option("--data", f.data, "dataset root");
  ana->add_option("--log", log_path, "training log (JSON lines) for the trajectory CSV");
  ana->add_option("--image", image_index, "test image for the anchor dump");

  auto* att = app.add_subcommand("export-attention", "write the attention map of one test image");
  add_config_flags(att, f);
  att->add_option("--checkpoint", f.checkpoint, "model checkpoint")->required();
  att->add_option("--data", f.data, "dataset root");
  att->add_option("--image", image_index, "test image index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  return guarded([&] {
    if (gen->parsed()) {
      auto cfg = f.load();
      const auto out = f.out_dir(cfg.seed);
      data::write_splits(out, data::build_splits(cfg.split_config()));
      write_text(out / "config.txt", train::to_text(cfg));
      std::cout << "wrote " << out.string() << "\n";
    } else if (trn->parsed()) {
      auto cfg = f.load();
      const auto out = f.out_dir(cfg.seed);
      auto splits = load_or_generate(cfg, f.data);
      auto r = train_and_evaluate(cfg, splits, out);
      std::cout << "target mAP " << fmt(r.target_map) << " (" << out.string() << ")\n";
    } else if (evl->parsed()) {
      train::Config cfg;
      auto model = load_checkpoint(f, cfg);
      std::vector<data::Annotation> labels;
      auto images = test_images(cfg, f.data, &labels);
      auto ev = train::evaluate_model(model, images, labels, cfg.infer_options());
      const auto json = ev.result.to_json();
      if (!f.out.empty()) write_text(fs::path(f.out) / "eval.json", json + "\n");
      std::cout << json << "\n";
    } else if (abl->parsed()) {
      auto cfg = f.load();
      const auto out = f.out_dir(cfg.seed);
      auto splits = load_or_generate(cfg, f.data);
      if (variants.empty()) {
        for (const auto& v : ablation_variants()) variants.push_back(v.name);
      }
      for (const auto& v : variants) find_variant(v);
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = 0; i < num_seeds; ++i) seeds.push_back(cfg.seed + i);
      auto rows = run_ablation(cfg, splits, variants, seeds, out, &std::cerr);
      write_text(out / "ablation.csv", ablation_csv(rows));
      write_text(out / "ablation_summary.csv", ablation_summary_csv(rows));
      std::cout << ablation_summary_csv(rows);
    } else if (ana->parsed()) {
      train::Config cfg;
      auto model = load_checkpoint(f, cfg);
      const auto out = f.out_dir(cfg.seed);
      std::vector<data::Annotation> labels;
      auto images = test_images(cfg, f.data, &labels);
      auto rep = train::correlation_report(model, images, labels, cfg.infer_options());
      write_text(out / "correlation.csv", rep.to_csv());
      if (image_index >= images.size()) throw train::ConfigError("--image out of range");
      write_text(out / "anchors.csv", train::anchor_csv(model, images[image_index].pixels));
      if (!log_path.empty()) {
        write_text(out / "trajectory.csv",
                   train::trajectory_csv(train::read_training_log(log_path)));
      }
      std::cout << "pearson(hardness, recall) = " << fmt(rep.coefficient) << "\n";
    } else if (att->parsed()) {
      train::Config cfg;
      auto model = load_checkpoint(f, cfg);
      const auto out = f.out_dir(cfg.seed);
      auto images = test_images(cfg, f.data, nullptr);
      if (image_index >= images.size()) throw train::ConfigError("--image out of range");
      auto ex = train::export_attention(model, images[image_index].pixels);
      const std::string stem = "attention_" + std::to_string(image_index);
      write_text(out / (stem + ".csv"), ex.csv);
      write_text(out / (stem + ".pgm"), ex.pgm);
      std::cout << "wrote " << (out / stem).string() << ".{csv,pgm}\n";
    }
  });
}

}  // namespace cida::cli
