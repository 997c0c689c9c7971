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
#include "cida/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace cida::nn {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw CheckpointError("checkpoint truncated");
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace

const NamedArray* CheckpointData::find(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

CheckpointData snapshot(const ParameterSet& params, std::uint64_t iteration, std::string config) {
  CheckpointData data;
  data.iteration = iteration;
  data.config = std::move(config);
  for (const auto& p : params.all()) {
    NamedArray a{p->name(), p->shape(), {}};
    a.values.reserve(p->value().size());
    for (Real v : p->value()) a.values.push_back(static_cast<float>(v));
    data.arrays.push_back(std::move(a));
  }
  return data;
}

void restore(const CheckpointData& data, ParameterSet& params) {
  for (auto& p : params.all()) {
    const NamedArray* a = data.find(p->name());
    if (!a) throw CheckpointError("checkpoint is missing parameter " + p->name());
    if (a->shape != p->shape()) {
      throw CheckpointError("shape mismatch for " + p->name() + ": " + shape_str(a->shape) +
                            " vs " + shape_str(p->shape()));
    }
    auto value = p->value();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] = a->values[i];
    for (auto& m : p->momentum_buffer()) m = 0.0;
    p->zero_grad();
  }
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  Writer w;
  w.raw(kMagic, 4);
  w.u8(kCheckpointVersion);
  w.u64(data.iteration);
  w.str(data.config);
  w.u32(static_cast<std::uint32_t>(data.arrays.size()));
  for (const auto& a : data.arrays) {
    if (shape_numel(a.shape) != a.values.size()) {
      throw CheckpointError("array " + a.name + " has inconsistent shape");
    }
    w.str(a.name);
    w.u32(static_cast<std::uint32_t>(a.shape.size()));
    for (auto e : a.shape) w.u32(static_cast<std::uint32_t>(e));
    for (float v : a.values) w.f32(v);
  }

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  char magic[4];
  for (auto& c : magic) c = static_cast<char>(r.u8());
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("not a checkpoint file");
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  CheckpointData data;
  data.iteration = r.u64();
  data.config = r.str();
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name = r.str();
    const std::uint32_t rank = r.u32();
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(r.u32());
    const std::size_t n = shape_numel(a.shape);
    a.values.resize(n);
    for (auto& v : a.values) v = r.f32();
    data.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  return data;
}

}  // namespace cida::nn
