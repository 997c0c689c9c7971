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
#include <stdexcept>
#include <string>
#include <vector>

#include "cida/data/synthetic.hpp"
#include "cida/data/types.hpp"

// On-disk layout of one split directory:
//
//   manifest.tsv      "# cida-dataset v1" header, then one line per image:
//                     relpath<TAB>domain<TAB>class:x1,y1,x2,y2[;...]
//                     Eval-only splits omit the third column.
//   eval_labels.tsv   eval-only splits: same three-column format.
//   images/NNNNNN.ppm binary 8-bit RGB (P6).
namespace cida::data {

inline constexpr const char* kManifestHeader = "# cida-dataset v1";
inline constexpr const char* kManifestName = "manifest.tsv";
inline constexpr const char* kEvalLabelsName = "eval_labels.tsv";

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Labeled split: annotations live in the manifest.
void write_dataset(const std::filesystem::path& dir, const std::vector<AnnotatedImage>& images);
std::vector<AnnotatedImage> read_dataset(const std::filesystem::path& dir);

/// Eval-only split: annotations go to eval_labels.tsv.
void write_target_split(const std::filesystem::path& dir, const TargetSplit& split);
/// Reads images only. Never opens eval_labels.tsv.
std::vector<UnlabeledImage> read_unlabeled(const std::filesystem::path& dir);
/// The eval-only accessor.
std::vector<Annotation> read_eval_labels(const std::filesystem::path& dir);
/// Images plus eval labels; used by evaluation and oracle training.
TargetSplit read_target_split(const std::filesystem::path& dir);

/// "class:x1,y1,x2,y2;..." <-> Annotation. `line` is used in error messages.
std::string format_annotation(const Annotation& a);
Annotation parse_annotation(const std::string& field, std::size_t line);

void write_ppm(const std::filesystem::path& path, const nn::Tensor& image);
nn::Tensor read_ppm(const std::filesystem::path& path);

/// source_train/, target_train/, target_test/ under `root`.
void write_splits(const std::filesystem::path& root, const DatasetSplits& splits);

}  // namespace cida::data
