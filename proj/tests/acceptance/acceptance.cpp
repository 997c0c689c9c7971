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
// Acceptance run: one PASS/FAIL line per criterion. Exit status 0 only when
// every criterion passes. Artifacts (ablation table, reference run, report)
// are written under --out.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "cida/cli/commands.hpp"
#include "cida/data/dataset_io.hpp"
#include "cida/eval/metrics.hpp"
#include "cida/model/backbone_mua.hpp"
#include "cida/model/dis_head.hpp"
#include "cida/model/trpn.hpp"
#include "cida/nn/checkpoint.hpp"
#include "cida/train/analysis.hpp"
#include "cida/train/config.hpp"
#include "cida/train/trainer.hpp"
#include "loss_paths.hpp"
#include "op_checks.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace cida;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSeconds = 120.0;
constexpr double kEntropyTolerance = 1e-9;
constexpr double kKlTolerance = 1e-6;
constexpr double kApTolerance = 1e-9;
constexpr int kOracleInstances = 200;
constexpr double kMinGainPoints = 5.0;
constexpr double kAblationSlackPoints = 1.0;
constexpr double kAblationBudgetSeconds = 2.0 * 3600.0;
constexpr double kDynamicRatio = 0.9;
constexpr std::size_t kSeeds = 3;

struct Report {
  int failed = 0;
  std::ostringstream json;

  void line(int id, bool ok, const std::string& what, const std::string& detail) {
    std::cout << "criterion " << id << " " << (ok ? "PASS" : "FAIL") << "  " << what << ": "
              << detail << std::endl;
    failed += ok ? 0 : 1;
  }
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s.precision(2);
  s << std::scientific << v;
  return s.str();
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void gradients(Report& rep) {
  const auto t0 = Clock::now();
  auto checks = testing::check_ops();
  for (auto& c : testing::check_loss_paths()) checks.push_back(std::move(c));
  const double elapsed = seconds_since(t0);
  double worst = 0;
  std::string where;
  std::size_t probes = 0;
  for (const auto& c : checks) {
    probes += c.check.probes;
    if (c.check.max_rel_error >= worst) {
      worst = c.check.max_rel_error;
      where = c.name + " " + c.check.worst;
    }
  }
  const bool ok = worst < kGradTolerance && elapsed < kGradBudgetSeconds && probes > 0;
  rep.line(1, ok, "gradient correctness",
           std::to_string(checks.size()) + " checks, " + std::to_string(probes) +
               " probes, max rel error " + sci(worst) + " (" + where + "), " +
               fixed(elapsed, 2) + " s");
}

void analytic(Report& rep) {
  std::vector<std::string> bad;
  const std::vector<double> p{1.0, std::exp(-1.0), 0.5};
  const std::vector<double> want{0.0, std::exp(-1.0), 0.5 * std::log(2.0)};
  const nn::Tensor e = model::pixel_entropy(nn::Tensor::constant({3}, p));
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(std::abs(e.values()[i] - want[i]) <= kEntropyTolerance)) bad.push_back("entropy " + std::to_string(i));
  }
  struct KlCase {
    std::vector<double> s, t;
    double want;
  };
  const std::vector<KlCase> kl{{{0.3, 0.3}, {0.3, 0.3}, 0.0},
                               {{0.5, 0.5}, {0.9, 0.1}, 0.5 * std::log(25.0 / 9.0)},
                               {{0.99, 0.01}, {0.01, 0.99}, 1.0}};
  for (std::size_t i = 0; i < kl.size(); ++i) {
    if (!(std::abs(model::kl_objectness(kl[i].s, kl[i].t) - kl[i].want) <= kKlTolerance)) {
      bad.push_back("kl " + std::to_string(i));
    }
  }
  model::DisState st{300, 16, 300};
  if (model::dynamic_sample_count(st, 1.0, 0.0) != 300) bad.push_back("N_final(1,0)");
  if (model::dynamic_sample_count(st, 0.6, 0.2) != 210) bad.push_back("N_final(0.6,0.2)");
  if (model::dynamic_sample_count(st, 0.0, 1.0) != 16) bad.push_back("N_final(0,1)");
  std::string detail = "3 entropy, 3 KL, 3 sample-count fixtures";
  for (const auto& b : bad) detail += "; mismatch " + b;
  rep.line(2, bad.empty(), "analytic oracles", detail);
}

void oracles(Report& rep) {
  std::mt19937 rng(2026);
  std::size_t nms_bad = 0, ap_bad = 0;
  double ap_worst = 0;
  std::uniform_int_distribution<int> count(0, 12), level(0, 5), cls(0, 1), img(0, 2), ngt(0, 3);
  std::uniform_real_distribution<double> thr(0.1, 0.9), u(0.0, 1.0);
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    std::vector<data::Box> boxes;
    std::vector<double> scores;
    for (int i = count(rng); i > 0; --i) {
      boxes.push_back(testing::random_box(rng, 12.0));
      scores.push_back(level(rng) / 5.0);
    }
    const double t = thr(rng);
    nms_bad += model::nms(boxes, scores, t) != testing::brute_force_nms(boxes, scores, t);
  }
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    std::vector<data::Annotation> gt(3);
    for (auto& a : gt) {
      for (int g = ngt(rng); g > 0; --g) {
        a.boxes.push_back(testing::random_box(rng));
        a.classes.push_back(cls(rng));
      }
    }
    std::vector<eval::Detection> dets;
    std::vector<testing::RefDetection> ref;
    for (int d = count(rng) % 9; d > 0; --d) {
      const auto i = static_cast<std::size_t>(img(rng));
      data::Box b = testing::random_box(rng);
      if (!gt[i].boxes.empty() && u(rng) < 0.5) {
        b = gt[i].boxes[static_cast<std::size_t>(d) % gt[i].size()];
        b.x2 += 0.5 * u(rng);
      }
      const int c = cls(rng);
      const double s = level(rng) / 5.0;
      dets.push_back({i, c, s, b});
      ref.push_back({i, c, s, b});
    }
    for (int c = 0; c < 2; ++c) {
      const double diff =
          std::abs(eval::average_precision(dets, gt, c) - testing::brute_force_ap(ref, gt, c));
      ap_worst = std::max(ap_worst, diff);
      ap_bad += !(diff <= kApTolerance);
    }
  }
  rep.line(3, nms_bad == 0 && ap_bad == 0, "oracle equivalence",
           std::to_string(kOracleInstances) + " NMS instances (" + std::to_string(nms_bad) +
               " mismatches), " + std::to_string(kOracleInstances) + " AP instances x 2 classes (" +
               std::to_string(ap_bad) + " mismatches, max diff " + sci(ap_worst) + ")");
}

void invariances(Report& rep) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t scale_bad = 0, const_bad = 0, cases = 0;
  const std::vector<double> factors{1e-3, 0.5, 2.0, 1.0 / std::log(2.0), 1.0 / std::log(10.0), 1e3};
  for (int trial = 0; trial < 100; ++trial) {
    model::DecodedBoxes d;
    std::vector<double> o, e;
    for (int i = 0; i < 40; ++i) {
      d.boxes.push_back(testing::random_box(rng, 40.0));
      d.valid.push_back(u(rng) > 0.1);
      o.push_back(u(rng));
      e.push_back(u(rng) * std::exp(-1.0));
    }
    model::SelectConfig cfg;
    cfg.top_n = 8;
    const auto base = model::select_top_n(model::make_proposals(d, o, e), cfg).kept;
    for (double c : factors) {
      auto scaled = e;
      for (auto& v : scaled) v *= c;
      scale_bad += model::select_top_n(model::make_proposals(d, o, scaled), cfg).kept != base;
      ++cases;
    }
    auto vanilla = cfg;
    vanilla.transferable = false;
    const auto plain = model::select_top_n(model::make_proposals(d, o, {}), vanilla).kept;
    const_bad += model::select_top_n(model::make_proposals(d, o, std::vector<double>(40, 0.3)), cfg).kept != plain;
  }
  rep.line(4, scale_bad == 0 && const_bad == 0, "filtering invariances",
           std::to_string(cases) + " scaled sets (" + std::to_string(scale_bad) +
               " changed), 100 constant-E sets (" + std::to_string(const_bad) + " differ from vanilla)");
}

struct Ablation {
  std::map<std::string, std::vector<double>> maps;
  double seconds = 0;
  std::vector<train::StepRecord> reference_log;
};

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

Ablation run_ablation(const train::Config& base, const data::DatasetSplits& splits, const fs::path& out) {
  Ablation a;
  const auto t0 = Clock::now();
  std::ofstream csv(out / "ablation.csv");
  csv << "variant,seed,map\n";
  for (const std::string name : {"full", "source_only", "baseline", "mua", "trpn", "dis"}) {
    for (std::size_t k = 0; k < kSeeds; ++k) {
      auto cfg = cli::apply_variant(base, cli::find_variant(name));
      cfg.seed = base.seed + k;
      const auto r = cli::train_and_evaluate(cfg, splits, out / (name + "-seed" + std::to_string(cfg.seed)));
      a.maps[name].push_back(r.target_map);
      if (name == "full" && k == 0) a.reference_log = r.log;
      csv << name << ',' << cfg.seed << ',' << train::format_double(r.target_map) << '\n' << std::flush;
      std::cout << "  trained " << name << " seed " << cfg.seed << ": target mAP " << fixed(r.target_map)
                << " (" << fixed(seconds_since(t0), 0) << " s elapsed)" << std::endl;
    }
  }
  a.seconds = seconds_since(t0);
  return a;
}

void dynamics(Report& rep, const std::vector<train::StepRecord>& log) {
  if (log.size() < 10) {
    rep.line(5, false, "DIS dynamics", "reference log too short");
    return;
  }
  const std::size_t k = log.size() / 10;
  double first = 0, last = 0;
  std::size_t lo = log.front().n_final, hi = lo;
  for (std::size_t i = 0; i < log.size(); ++i) {
    lo = std::min(lo, log[i].n_final);
    hi = std::max(hi, log[i].n_final);
    if (i < k) first += static_cast<double>(log[i].n_final);
    if (i >= log.size() - k) last += static_cast<double>(log[i].n_final);
  }
  first /= static_cast<double>(k);
  last /= static_cast<double>(k);
  const bool dynamic = static_cast<double>(lo) < kDynamicRatio * static_cast<double>(hi);
  rep.line(5, dynamic && last > first, "DIS dynamics",
           "N_final min " + std::to_string(lo) + ", max " + std::to_string(hi) + "; mean first 10% " +
               fixed(first, 2) + ", last 10% " + fixed(last, 2));
}

void gain(Report& rep, const Ablation& a) {
  const double so = mean(a.maps.at("source_only")), full = mean(a.maps.at("full"));
  const double base = mean(a.maps.at("baseline"));
  const double gain_points = 100.0 * (full - so);
  bool ok = gain_points >= kMinGainPoints && a.seconds < kAblationBudgetSeconds;
  std::string detail = "mean target mAP source-only " + fixed(100 * so, 2) + ", full " + fixed(100 * full, 2) +
                       " (gain " + fixed(gain_points, 2) + " points); baseline " + fixed(100 * base, 2);
  for (const std::string m : {"mua", "trpn", "dis"}) {
    const double v = mean(a.maps.at(m));
    ok = ok && 100.0 * v >= 100.0 * base - kAblationSlackPoints;
    detail += ", +" + m + " " + fixed(100 * v, 2);
  }
  detail += "; " + fixed(a.seconds / 60.0, 1) + " min";
  rep.line(6, ok, "directional adaptation gain", detail);
}

void correlation(Report& rep, const model::Detector& m, const train::Config& cfg,
                 const data::DatasetSplits& splits, const fs::path& out) {
  const auto r = train::correlation_report(m, splits.target_test.images(), splits.target_test.eval_labels(),
                                           cfg.infer_options());
  cli::write_text(out / "correlation.csv", r.to_csv());
  rep.line(7, r.coefficient > 0.0, "correlation analysis",
           "Pearson(hardness, recall) = " + fixed(r.coefficient) + " over " + std::to_string(r.rows.size()) +
               " target images");
}

void unsupervised(Report& rep, const train::Config& cfg, const data::DatasetSplits& splits,
                  const fs::path& reference, const fs::path& out) {
  const fs::path data_dir = out / "data";
  fs::remove_all(data_dir);
  data::write_splits(data_dir, splits);
  fs::remove(data_dir / "target_train" / data::kEvalLabelsName);
  bool labels_gone = false;
  try {
    data::read_eval_labels(data_dir / "target_train");
  } catch (const data::DatasetError&) {
    labels_gone = true;
  }
  const auto disk = cli::load_or_generate(cfg, data_dir);
  const fs::path run = out / "unlabeled-run";
  cli::train_and_evaluate(cfg, disk, run);
  const bool log_same = read_bytes(run / "train_log.jsonl") == read_bytes(reference / "train_log.jsonl");
  const bool ckpt_same = read_bytes(run / "model.ckpt") == read_bytes(reference / "model.ckpt");
  rep.line(8, labels_gone && log_same && ckpt_same, "unsupervised contract",
           std::string("target labels ") + (labels_gone ? "deleted" : "STILL READABLE") + "; log " +
               (log_same ? "identical" : "differs") + ", checkpoint " + (ckpt_same ? "identical" : "differs") +
               " to the in-memory reference run");
}

void inference(Report& rep, const model::Detector& m, const train::Config& cfg, const data::DatasetSplits& splits) {
  const auto base = cfg.infer_options();
  auto no_dis = base, no_mua = base, no_trpn = base;
  no_dis.dis = !base.dis;
  no_mua.mua = false;
  no_trpn.trpn = false;
  auto same = [](const std::vector<eval::Detection>& a, const std::vector<eval::Detection>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].cls != b[i].cls || a[i].score != b[i].score || !(a[i].box == b[i].box)) return false;
    }
    return true;
  };
  std::size_t dis_diff = 0, mua_diff = 0, trpn_diff = 0;
  const auto& images = splits.target_test.images();
  for (const auto& img : images) {
    const auto ref = model::infer(m, img.pixels, base);
    dis_diff += !same(ref, model::infer(m, img.pixels, no_dis));
    mua_diff += !same(ref, model::infer(m, img.pixels, no_mua));
    trpn_diff += !same(ref, model::infer(m, img.pixels, no_trpn));
  }
  const auto n = std::to_string(images.size());
  rep.line(9, dis_diff == 0 && mua_diff > 0 && trpn_diff > 0, "inference contract",
           "toggling DIS changed " + std::to_string(dis_diff) + "/" + n + " images; disabling MUA changed " +
               std::to_string(mua_diff) + "/" + n + ", TRPN " + std::to_string(trpn_diff) + "/" + n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::string out_dir = (fs::temp_directory_path() / "cida_acceptance").string();
  std::string config_path;
  bool quick = false;
  app.add_option("--out", out_dir, "artifact directory");
  app.add_option("--config", config_path, "override the default configuration");
  app.add_flag("--fast-only", quick, "run criteria 1-4 only");
  CLI11_PARSE(app, argc, argv);

  Report rep;
  gradients(rep);
  analytic(rep);
  oracles(rep);
  invariances(rep);
  if (quick) return rep.failed == 0 ? 0 : 1;

  try {
    const fs::path out = out_dir;
    fs::create_directories(out);
    const train::Config cfg = config_path.empty() ? train::Config{} : train::load_config(config_path);
    const auto splits = data::build_splits(cfg.split_config());
    const auto ablation = run_ablation(cfg, splits, out);
    const fs::path reference = out / ("full-seed" + std::to_string(cfg.seed));

    dynamics(rep, ablation.reference_log);
    gain(rep, ablation);
    train::Config ref_cfg;
    const auto model = train::load_model(nn::read_checkpoint(reference / "model.ckpt"), &ref_cfg);
    correlation(rep, model, ref_cfg, splits, out);
    unsupervised(rep, ref_cfg, splits, reference, out);
    inference(rep, model, ref_cfg, splits);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 2;
  }
  std::cout << (rep.failed == 0 ? "all criteria PASS" : std::to_string(rep.failed) + " criteria FAIL") << std::endl;
  return rep.failed == 0 ? 0 : 1;
}
