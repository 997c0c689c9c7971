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
#include <vector>

#include "cida/nn/tensor.hpp"

namespace cida::nn {

// Binary layout, all integers little-endian:
//   "CKPT"  u8 version
//   u64 iteration  u32 len  config text (UTF-8)
//   u32 count, then per entry:
//     u32 len  name  u32 rank  u32 extents[rank]  f32 values[numel] (row-major)
inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointData {
  std::uint64_t iteration = 0;
  std::string config;
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

CheckpointData snapshot(const ParameterSet& params, std::uint64_t iteration, std::string config);
/// Copies values into matching parameters. Every parameter must be present
/// with an identical shape; momentum buffers are reset.
void restore(const CheckpointData& data, ParameterSet& params);

/// Writes to a sibling temp file and renames it over `path`.
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace cida::nn
