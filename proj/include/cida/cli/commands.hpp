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
#include <ostream>
#include <string>
#include <vector>

#include "cida/data/synthetic.hpp"
#include "cida/train/analysis.hpp"
#include "cida/train/config.hpp"

namespace cida::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericAbort = 3, kIoError = 4 };

struct Variant {
  std::string name;
  bool adapt, mua, trpn, dis, oracle;
};

/// source_only, baseline, mua, trpn, dis, mua_trpn, mua_dis, trpn_dis, full, oracle.
const std::vector<Variant>& ablation_variants();
const Variant& find_variant(const std::string& name);
train::Config apply_variant(train::Config cfg, const Variant& v);

/// Splits from disk when `data_dir` is non-empty (target labels are read
/// only through the eval-only accessor), generated from `cfg` otherwise.
data::DatasetSplits load_or_generate(const train::Config& cfg,
                                     const std::filesystem::path& data_dir);

struct RunResult {
  std::vector<train::StepRecord> log;
  double target_map = 0;
};

/// Trains one model and writes config.txt, train_log.jsonl, trajectory.csv,
/// model.ckpt and eval.json under `out` (when non-empty).
RunResult train_and_evaluate(const train::Config& cfg, const data::DatasetSplits& splits,
                             const std::filesystem::path& out, model::Detector* model_out = nullptr);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double map = 0;
};

/// Every (variant, seed) pair on one dataset; rows in variant-major order.
std::vector<AblationRow> run_ablation(const train::Config& base, const data::DatasetSplits& splits,
                                      const std::vector<std::string>& variants,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::filesystem::path& out,
                                      std::ostream* progress = nullptr);

/// Header `variant,seed,map`.
std::string ablation_csv(const std::vector<AblationRow>& rows);
/// Header `variant,seeds,mean_map`, variants in first-seen order.
std::string ablation_summary_csv(const std::vector<AblationRow>& rows);

/// `<timestamp>-seed<k>` below `runs/`.
std::filesystem::path default_run_dir(std::uint64_t seed);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace cida::cli
