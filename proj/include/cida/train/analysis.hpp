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
#include <string>
#include <vector>

#include "cida/eval/metrics.hpp"
#include "cida/model/detector.hpp"
#include "cida/train/trainer.hpp"

namespace cida::train {

struct ModelEvaluation {
  eval::EvalResult result;
  std::vector<eval::Detection> detections;  // image index set per entry
};

/// Runs `infer` on every image and scores against `labels`.
ModelEvaluation evaluate_model(const model::Detector& model,
                               const std::vector<data::UnlabeledImage>& images,
                               const std::vector<data::Annotation>& labels,
                               const model::InferOptions& opt, int num_classes = 3);

struct CorrelationRow {
  std::size_t image = 0;
  double hardness = 0;
  double recall = 0;
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;
  double coefficient = 0;

  /// Header `image,hardness,recall`.
  std::string to_csv() const;
};

/// Per target image: the auxiliary discriminator's mean target probability
/// and the recall of the image's detections at IoU 0.5; Pearson over images.
CorrelationReport correlation_report(const model::Detector& model,
                                     const std::vector<data::UnlabeledImage>& images,
                                     const std::vector<data::Annotation>& labels,
                                     const model::InferOptions& opt);

/// Header `iteration,hardness,kl,n_final`.
std::string trajectory_csv(const std::vector<StepRecord>& log);
/// Reads the JSON-lines training log back into step records.
std::vector<StepRecord> read_training_log(const std::filesystem::path& path);

/// Header `anchor,a,y,x,x1,y1,x2,y2,objectness,transferability,reweighted`,
/// one row per anchor of one image.
std::string anchor_csv(const model::Detector& model, const nn::Tensor& image);

struct AttentionExport {
  std::string csv;  // H_L rows of W_L comma-separated values
  std::string pgm;  // binary P5, input resolution, 255 at 1/e
};

AttentionExport export_attention(const model::Detector& model, const nn::Tensor& image);

}  // namespace cida::train
