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
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cida/cli/commands.hpp"
#include "cida/data/synthetic.hpp"
#include "cida/eval/metrics.hpp"
#include "cida/model/backbone_mua.hpp"
#include "cida/model/detector.hpp"
#include "cida/model/dis_head.hpp"
#include "cida/model/trpn.hpp"
#include "cida/nn/checkpoint.hpp"
#include "cida/train/config.hpp"
#include "cida/train/trainer.hpp"

namespace py = pybind11;
using namespace cida;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const nn::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  const auto v = t.values();
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

nn::Tensor from_numpy(const Array& a) {
  std::vector<std::size_t> shape(a.shape(), a.shape() + a.ndim());
  return nn::Tensor::constant(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

data::Box to_box(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

std::vector<data::Box> to_boxes(const std::vector<std::array<double, 4>>& bs) {
  std::vector<data::Box> out;
  for (const auto& b : bs) out.push_back(to_box(b));
  return out;
}

py::dict scene_dict(const data::AnnotatedImage& img) {
  py::dict d;
  d["pixels"] = to_numpy(img.pixels);
  std::vector<std::array<double, 4>> boxes;
  for (const auto& b : img.objects.boxes) boxes.push_back(b.as_array());
  d["boxes"] = boxes;
  d["classes"] = img.objects.classes;
  d["domain"] = static_cast<int>(img.domain);
  return d;
}

py::dict detection_dict(const eval::Detection& d) {
  py::dict out;
  out["image"] = d.image;
  out["cls"] = d.cls;
  out["score"] = d.score;
  out["box"] = d.box.as_array();
  return out;
}

eval::Detection detection_from(const py::dict& d) {
  eval::Detection out;
  out.image = d.contains("image") ? d["image"].cast<std::size_t>() : 0;
  out.cls = d["cls"].cast<int>();
  out.score = d["score"].cast<double>();
  out.box = to_box(d["box"].cast<std::array<double, 4>>());
  return out;
}

std::vector<data::Annotation> annotations_from(const py::list& gt) {
  std::vector<data::Annotation> out;
  for (const auto& item : gt) {
    auto d = item.cast<py::dict>();
    out.push_back({to_boxes(d["boxes"].cast<std::vector<std::array<double, 4>>>()),
                   d["classes"].cast<std::vector<int>>()});
  }
  return out;
}

py::list step_records(const std::vector<train::StepRecord>& log) {
  py::list out;
  for (const auto& r : log) {
    py::dict d;
    d["iteration"] = r.iteration;
    d["hardness"] = r.hardness;
    d["kl"] = r.kl;
    d["n_final"] = r.n_final;
    d["total"] = r.total;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Domain-adaptive two-stage detector core";

  py::register_exception<train::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<nn::ContractError>(m, "ContractError", PyExc_ValueError);

  m.def(
      "generate_scene",
      [](std::uint64_t seed, bool target) {
        return scene_dict(data::generate_scene(seed, target ? data::Domain::kTarget
                                                            : data::Domain::kSource));
      },
      py::arg("seed"), py::arg("target") = false);

  m.def(
      "apply_domain_shift",
      [](const Array& image, double blur, double brightness, double contrast, double noise,
         std::uint64_t seed) {
        data::ShiftParams p;
        p.blur_sigma = blur;
        p.brightness_delta = brightness;
        p.contrast_gain = contrast;
        p.noise_std = noise;
        return to_numpy(data::apply_domain_shift(from_numpy(image), p, seed));
      },
      py::arg("image"), py::arg("blur") = 0.0, py::arg("brightness") = 0.0,
      py::arg("contrast") = 1.0, py::arg("noise") = 0.0, py::arg("seed") = 0);

  m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
    return eval::iou(to_box(a), to_box(b));
  });

  m.def(
      "nms",
      [](const std::vector<std::array<double, 4>>& boxes, const std::vector<double>& scores,
         double threshold) { return model::nms(to_boxes(boxes), scores, threshold); },
      py::arg("boxes"), py::arg("scores"), py::arg("threshold"));

  m.def(
      "average_precision",
      [](const py::list& dets, const py::list& gt, int cls, double iou_thresh) {
        std::vector<eval::Detection> d;
        for (const auto& x : dets) d.push_back(detection_from(x.cast<py::dict>()));
        return eval::average_precision(d, annotations_from(gt), cls, iou_thresh);
      },
      py::arg("detections"), py::arg("ground_truth"), py::arg("cls"), py::arg("iou_thresh") = 0.5);

  m.def("pearson", &eval::pearson);

  m.def("pixel_entropy", [](const Array& p, bool full_binary) {
    model::EntropyConfig cfg;
    cfg.full_binary = full_binary;
    return to_numpy(model::pixel_entropy(from_numpy(p), cfg));
  }, py::arg("prob"), py::arg("full_binary") = false);

  m.def("kl_objectness",
        [](const std::vector<double>& s, const std::vector<double>& t) {
          return model::kl_objectness(s, t);
        });

  m.def(
      "dynamic_sample_count",
      [](std::size_t n, std::size_t n_min, double hardness, double kl) {
        model::DisState st{n, n_min, n};
        return model::dynamic_sample_count(st, hardness, kl);
      },
      py::arg("n"), py::arg("n_min"), py::arg("hardness"), py::arg("kl"));

  m.def("default_config", [] { return train::to_text(train::Config{}); });
  m.def("parse_config", [](const std::string& text) {
    return train::to_text(train::parse_config_text(text));
  });

  m.def(
      "train",
      [](const std::string& config_text, const std::filesystem::path& out) {
        const auto cfg = train::parse_config_text(config_text);
        cli::RunResult r;
        {
          py::gil_scoped_release release;
          r = cli::train_and_evaluate(cfg, data::build_splits(cfg.split_config()), out);
        }
        py::dict d;
        d["target_map"] = r.target_map;
        d["log"] = step_records(r.log);
        return d;
      },
      py::arg("config") = "", py::arg("out") = std::filesystem::path());

  m.def(
      "detect",
      [](const std::filesystem::path& checkpoint, const Array& image, bool mua, bool trpn) {
        train::Config cfg;
        auto model = train::load_model(nn::read_checkpoint(checkpoint), &cfg);
        auto opt = cfg.infer_options();
        opt.mua = opt.mua && mua;
        opt.trpn = opt.trpn && trpn;
        py::list out;
        for (const auto& d : model::infer(model, from_numpy(image), opt)) out.append(detection_dict(d));
        return out;
      },
      py::arg("checkpoint"), py::arg("image"), py::arg("mua") = true, py::arg("trpn") = true);

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "cida");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    py::gil_scoped_release release;
    return cli::run_cli(static_cast<int>(argv.size()), argv.data());
  });
}
