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

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cida/model/detector.hpp"
#include "cida/nn/checkpoint.hpp"
#include "cida/train/config.hpp"

namespace cida::train {

/// A loss became NaN or infinite. `what()` lists every term.
class NumericAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossBundle {
  double l_rpn = 0, l_reg = 0, l_cls = 0, l_dis = 0;
  double l_adv_img = 0, l_adv_fus = 0, l_adv_rpn = 0, l_adv_ins = 0;
  double lambda = 1.0;

  double detection() const { return l_rpn + l_reg + l_cls; }
  double adversarial() const { return l_adv_img + l_adv_fus + l_adv_rpn + l_adv_ins; }
  double total() const { return detection() + l_dis + lambda * adversarial(); }
};

struct StepRecord {
  std::size_t iteration = 0;
  LossBundle losses;
  double total = 0;  // the value that was backpropagated
  double lr = 0;
  double hardness = 0;
  double kl = 0;
  std::size_t n_final = 0;

  std::string to_json() const;
};

/// Learning rate at `iteration` under the step schedule.
double learning_rate(const Config& cfg, std::size_t iteration);

/// Holds the model, optimizer state and the sampling RNG of one run.
class Trainer {
 public:
  Trainer(const Config& cfg, model::Detector& model);

  /// One optimizer step on a source/target pair. `target_labels` is only
  /// consulted in oracle mode. With `include_adversarial` false the four
  /// adversarial terms are left out of the graph entirely.
  StepRecord train_step(const data::AnnotatedImage& source, const data::UnlabeledImage& target,
                        const data::Annotation* target_labels = nullptr);

  void set_include_adversarial(bool on) { include_adversarial_ = on; }
  std::size_t iteration() const { return iteration_; }
  void set_iteration(std::size_t it) { iteration_ = it; }
  const model::DisState& dis_state() const { return dis_; }

 private:
  Config cfg_;
  model::Detector& model_;
  model::Rng rng_;
  model::DisState dis_;
  std::size_t iteration_ = 0;
  bool include_adversarial_ = true;
};

struct TrainData {
  const std::vector<data::AnnotatedImage>* source = nullptr;
  const std::vector<data::UnlabeledImage>* target = nullptr;
  const std::vector<data::Annotation>* target_labels = nullptr;  // oracle only
};

struct TrainOutputs {
  std::ostream* log = nullptr;                 // JSON lines, one per step
  std::filesystem::path checkpoint_path;        // written periodically and at the end
  std::function<void(const StepRecord&)> on_step;
};

/// Iterates train_step over shuffled source/target pairs.
std::vector<StepRecord> run_training(const Config& cfg, model::Detector& model,
                                     const TrainData& data, const TrainOutputs& outputs = {});

nn::CheckpointData make_checkpoint(const model::Detector& model, const Config& cfg,
                                   std::size_t iteration);
/// Rebuilds the model described by the checkpoint's config and loads its weights.
model::Detector load_model(const nn::CheckpointData& ckpt, Config* cfg_out = nullptr);

}  // namespace cida::train
