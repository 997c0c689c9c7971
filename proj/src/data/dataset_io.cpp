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
#include "cida/data/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace cida::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

std::string fmt_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw DatasetError("line " + std::to_string(line) + ": " + msg);
}

double parse_number(const std::string& s, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    fail(line, "malformed number '" + s + "'");
  }
  return v;
}

struct ManifestRecord {
  std::string relpath;
  Domain domain;
  std::string annotation;
  bool has_annotation;
  std::size_t line;
};

std::vector<ManifestRecord> read_records(const fs::path& file, bool require_annotation) {
  std::ifstream in(file);
  if (!in) throw DatasetError("cannot open " + file.string());
  std::vector<ManifestRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (line == 1) {
      if (text != kManifestHeader) {
        throw DatasetError(file.string() + ": unsupported version header '" + text + "'");
      }
      continue;
    }
    if (text.empty()) continue;
    auto cols = split(text, '\t');
    if (cols.size() < 2 || cols.size() > 3) fail(line, "expected 2 or 3 tab-separated fields");
    if (require_annotation && cols.size() != 3) fail(line, "missing annotation field");
    if (cols[1] != "0" && cols[1] != "1") fail(line, "domain must be 0 or 1");
    if (cols[0].empty()) fail(line, "empty image path");
    out.push_back({cols[0], cols[1] == "0" ? Domain::kSource : Domain::kTarget,
                   cols.size() == 3 ? cols[2] : std::string(), cols.size() == 3, line});
  }
  if (line == 0) throw DatasetError(file.string() + ": missing version header");
  return out;
}

std::string image_relpath(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "images/%06zu.ppm", i);
  return buf;
}

void write_lines(const fs::path& file, const std::vector<std::string>& lines) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + file.string());
  out << kManifestHeader << '\n';
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw DatasetError("write failed for " + file.string());
}

}  // namespace

std::string format_annotation(const Annotation& a) {
  std::string s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) s += ';';
    const Box& b = a.boxes[i];
    s += std::to_string(a.classes[i]) + ':' + fmt_number(b.x1) + ',' + fmt_number(b.y1) + ',' +
         fmt_number(b.x2) + ',' + fmt_number(b.y2);
  }
  return s;
}

Annotation parse_annotation(const std::string& field, std::size_t line) {
  Annotation a;
  if (field.empty()) return a;
  for (const auto& obj : split(field, ';')) {
    const auto colon = obj.find(':');
    if (colon == std::string::npos) fail(line, "object '" + obj + "' lacks class prefix");
    const double cls = parse_number(obj.substr(0, colon), line);
    if (cls < 0 || cls != std::floor(cls)) fail(line, "class must be a nonnegative integer");
    auto coords = split(obj.substr(colon + 1), ',');
    if (coords.size() != 4) fail(line, "box needs four coordinates");
    Box b{parse_number(coords[0], line), parse_number(coords[1], line),
          parse_number(coords[2], line), parse_number(coords[3], line)};
    if (b.x1 < 0 || b.y1 < 0 || b.x2 < 0 || b.y2 < 0) fail(line, "negative coordinate");
    if (!(b.x1 < b.x2 && b.y1 < b.y2)) fail(line, "box must satisfy x1<x2 and y1<y2");
    a.boxes.push_back(b);
    a.classes.push_back(static_cast<int>(cls));
  }
  return a;
}

void write_ppm(const fs::path& path, const nn::Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw DatasetError("PPM needs a 3 x H x W image");
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << "P6\n" << w << ' ' << h << "\n255\n";
  auto px = image.values();
  std::string row(w * 3, '\0');
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(px[(c * h + y) * w + x], 0.0, 1.0);
        row[x * 3 + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw DatasetError("write failed for " + path.string());
}

nn::Tensor read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("missing image file " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w == 0 || h == 0 || maxval != 255) {
    throw DatasetError("unsupported image format in " + path.string());
  }
  in.get();
  std::string bytes(w * h * 3, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw DatasetError("truncated image " + path.string());
  }
  std::vector<double> px(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        px[(c * h + y) * w + x] = static_cast<unsigned char>(bytes[(y * w + x) * 3 + c]) / 255.0;
      }
    }
  }
  return nn::Tensor::constant({3, h, w}, std::move(px));
}

void write_dataset(const fs::path& dir, const std::vector<AnnotatedImage>& images) {
  fs::create_directories(dir / "images");
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto rel = image_relpath(i);
    write_ppm(dir / rel, images[i].pixels);
    lines.push_back(rel + '\t' + std::to_string(static_cast<int>(images[i].domain)) + '\t' +
                    format_annotation(images[i].objects));
  }
  write_lines(dir / kManifestName, lines);
}

std::vector<AnnotatedImage> read_dataset(const fs::path& dir) {
  std::vector<AnnotatedImage> out;
  for (const auto& rec : read_records(dir / kManifestName, true)) {
    AnnotatedImage img;
    img.objects = parse_annotation(rec.annotation, rec.line);
    img.domain = rec.domain;
    img.pixels = read_ppm(dir / rec.relpath);
    try {
      validate_annotation(img.objects, img.pixels.dim(1), img.pixels.dim(2), 1 << 20);
    } catch (const std::invalid_argument& e) {
      fail(rec.line, e.what());
    }
    out.push_back(std::move(img));
  }
  return out;
}

void write_target_split(const fs::path& dir, const TargetSplit& split) {
  fs::create_directories(dir / "images");
  if (!split.has_labels()) throw DatasetError("target split has no held-out labels");
  std::vector<std::string> manifest, labels;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto rel = image_relpath(i);
    const auto& img = split.images()[i];
    write_ppm(dir / rel, img.pixels);
    const std::string dom = std::to_string(static_cast<int>(img.domain));
    manifest.push_back(rel + '\t' + dom);
    labels.push_back(rel + '\t' + dom + '\t' + format_annotation(split.eval_labels()[i]));
  }
  write_lines(dir / kManifestName, manifest);
  write_lines(dir / kEvalLabelsName, labels);
}

std::vector<UnlabeledImage> read_unlabeled(const fs::path& dir) {
  std::vector<UnlabeledImage> out;
  for (const auto& rec : read_records(dir / kManifestName, false)) {
    out.push_back({read_ppm(dir / rec.relpath), rec.domain});
  }
  return out;
}

std::vector<Annotation> read_eval_labels(const fs::path& dir) {
  const auto manifest = read_records(dir / kManifestName, false);
  const auto records = read_records(dir / kEvalLabelsName, true);
  if (records.size() != manifest.size()) {
    throw DatasetError("eval labels do not cover the manifest of " + dir.string());
  }
  std::vector<Annotation> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].relpath != manifest[i].relpath) {
      fail(records[i].line, "label path does not match manifest");
    }
    out.push_back(parse_annotation(records[i].annotation, records[i].line));
  }
  return out;
}

TargetSplit read_target_split(const fs::path& dir) {
  return TargetSplit(read_unlabeled(dir), read_eval_labels(dir));
}

void write_splits(const fs::path& root, const DatasetSplits& splits) {
  write_dataset(root / "source_train", splits.source_train);
  write_target_split(root / "target_train", splits.target_train);
  write_target_split(root / "target_test", splits.target_test);
}

}  // namespace cida::data
