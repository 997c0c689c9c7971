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
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cida/cli/commands.hpp"
#include "cida/data/dataset_io.hpp"
#include "cida/data/synthetic.hpp"
#include "cida/train/analysis.hpp"
#include "cida/train/config.hpp"
#include "cida/train/trainer.hpp"
#include "loss_paths.hpp"

using namespace cida;
using train::Config;

namespace {

Config small_config() {
  Config cfg;
  cfg.num_source = 4;
  cfg.num_target = 4;
  cfg.num_test = 2;
  cfg.backbone_widths = {4, 6, 8};
  cfg.disc_hidden = 4;
  cfg.rpn_hidden = 8;
  cfg.head_hidden = 16;
  cfg.roi_size = 3;
  cfg.top_n = 16;
  cfg.n_min = 4;
  cfg.iterations = 6;
  return cfg;
}

std::vector<double> flat_params(const model::Detector& m) {
  std::vector<double> out;
  for (const auto& p : m.params().all()) out.insert(out.end(), p->value().begin(), p->value().end());
  return out;
}

struct Fixture {
  Config cfg = small_config();
  data::DatasetSplits splits = data::build_splits(cfg.split_config());
  std::vector<data::Annotation> target_labels() const { return splits.target_train.eval_labels(); }
};

}  // namespace

TEST(LossPaths, MatchFiniteDifferences) {
  for (const auto& r : cida::testing::check_loss_paths()) {
    EXPECT_LT(r.check.max_rel_error, 1e-4) << r.name << ": " << r.check.worst;
    EXPECT_GT(r.check.probes, 0u);
  }
}

TEST(LossPaths, ReversalSignsOnFusionLoss) {
  model::Detector net(cida::testing::tiny_model_config(), 4);
  const auto src = cida::testing::tiny_image(7), tgt = cida::testing::tiny_image(8);
  model::PassOptions opt;
  opt.mua = false;
  opt.trpn = false;
  auto loss = [&] {
    return model::loss_adv_fus(net.forward_image(src, opt).fus.prob, net.forward_image(tgt, opt).fus.prob);
  };
  net.params().zero_grad();
  const double before = loss().item();
  nn::backprop(loss());
  auto step = [&](const std::string& prefix, double lr) {
    for (auto& p : net.params().all()) {
      if (p->name().rfind(prefix, 0) != 0) continue;
      for (std::size_t i = 0; i < p->value().size(); ++i) p->value()[i] -= lr * p->gradient()[i];
    }
  };
  const auto saved = flat_params(net);
  step("d_fus", 1e-3);
  EXPECT_LT(loss().item(), before);
  std::size_t k = 0;
  for (auto& p : net.params().all()) {
    for (auto& v : p->value()) v = saved[k++];
  }
  step("fusion.", 1e-3);
  EXPECT_GT(loss().item(), before);
}

TEST(LossPaths, AuxiliaryDiscriminatorIsIsolated) {
  model::Detector net(cida::testing::tiny_model_config(), 5);
  model::PassOptions opt;
  opt.mua = true;
  auto s = net.forward_image(cida::testing::tiny_image(1), opt), t = net.forward_image(cida::testing::tiny_image(2), opt);
  net.params().zero_grad();
  nn::backprop(model::loss_dis(net.dis_probability(s), net.dis_probability(t)));
  bool dis_moved = false;
  for (const auto& p : net.params().all()) {
    const bool own = p->name().rfind("d_dis", 0) == 0;
    for (double g : p->gradient()) {
      if (own) {
        dis_moved |= g != 0.0;
      } else {
        ASSERT_EQ(g, 0.0) << p->name();
      }
    }
  }
  EXPECT_TRUE(dis_moved);
}

TEST(Schedule, StepDropAtFiveSevenths) {
  Config cfg;
  cfg.iterations = 70;
  EXPECT_DOUBLE_EQ(train::learning_rate(cfg, 0), cfg.lr);
  EXPECT_DOUBLE_EQ(train::learning_rate(cfg, 49), cfg.lr);
  EXPECT_DOUBLE_EQ(train::learning_rate(cfg, 50), cfg.lr * 0.1);
}

TEST(Trainer, ZeroLambdaEqualsNoAdversarialTerms) {
  Fixture f;
  f.cfg.lambda = 0.0;
  model::Detector a(f.cfg.model_config(), 1), b(f.cfg.model_config(), 1);
  train::Trainer ta(f.cfg, a), tb(f.cfg, b);
  tb.set_include_adversarial(false);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& s = f.splits.source_train[i];
    const auto& t = f.splits.target_train.images()[i];
    auto ra = ta.train_step(s, t);
    auto rb = tb.train_step(s, t);
    EXPECT_EQ(ra.losses.detection(), rb.losses.detection());
    EXPECT_EQ(ra.total, rb.total);
  }
  EXPECT_EQ(flat_params(a), flat_params(b));
}

TEST(Trainer, LogLengthAndDeterminism) {
  Fixture f;
  model::Detector a(f.cfg.model_config(), 1), b(f.cfg.model_config(), 1);
  train::TrainData data{&f.splits.source_train, &f.splits.target_train.images(), nullptr};
  std::ostringstream la, lb;
  auto ra = train::run_training(f.cfg, a, data, {&la, {}, {}});
  auto rb = train::run_training(f.cfg, b, data, {&lb, {}, {}});
  EXPECT_EQ(ra.size(), f.cfg.iterations);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(flat_params(a), flat_params(b));
  std::size_t lines = 0;
  for (char c : la.str()) lines += c == '\n';
  EXPECT_EQ(lines, f.cfg.iterations);
  for (const auto& r : ra) {
    EXPECT_GE(r.n_final, f.cfg.n_min);
    EXPECT_LE(r.n_final, f.cfg.top_n);
  }
}

TEST(Trainer, ZeroIterationsKeepsInitialization) {
  Fixture f;
  f.cfg.iterations = 0;
  model::Detector a(f.cfg.model_config(), 2), fresh(f.cfg.model_config(), 2);
  train::TrainData data{&f.splits.source_train, &f.splits.target_train.images(), nullptr};
  EXPECT_TRUE(train::run_training(f.cfg, a, data).empty());
  EXPECT_EQ(flat_params(a), flat_params(fresh));
}

TEST(Trainer, OracleNeedsLabels) {
  Fixture f;
  f.cfg.oracle = true;
  model::Detector a(f.cfg.model_config(), 2);
  train::TrainData data{&f.splits.source_train, &f.splits.target_train.images(), nullptr};
  EXPECT_THROW(train::run_training(f.cfg, a, data), nn::ContractError);
  auto labels = f.target_labels();
  data.target_labels = &labels;
  EXPECT_EQ(train::run_training(f.cfg, a, data).size(), f.cfg.iterations);
}

TEST(Trainer, CheckpointRoundTrip) {
  Fixture f;
  model::Detector a(f.cfg.model_config(), 3);
  auto ckpt = train::make_checkpoint(a, f.cfg, 7);
  Config back;
  auto b = train::load_model(ckpt, &back);
  auto expected = flat_params(a);
  for (auto& v : expected) v = static_cast<float>(v);
  EXPECT_EQ(flat_params(b), expected);
  EXPECT_EQ(train::to_text(back), train::to_text(f.cfg));
  EXPECT_EQ(ckpt.iteration, 7u);
}

TEST(Trainer, LabelsDeletedFromDiskTrainIdentically) {
  namespace fs = std::filesystem;
  Fixture f;
  const fs::path root = fs::temp_directory_path() / "cida_test_unlabeled";
  fs::remove_all(root);
  data::write_splits(root / "data", f.splits);
  fs::remove(root / "data" / "target_train" / data::kEvalLabelsName);
  const auto disk = cli::load_or_generate(f.cfg, root / "data");
  cli::train_and_evaluate(f.cfg, f.splits, root / "memory");
  cli::train_and_evaluate(f.cfg, disk, root / "disk");
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const char* name : {"train_log.jsonl", "model.ckpt", "eval.json"}) {
    EXPECT_EQ(bytes(root / "disk" / name), bytes(root / "memory" / name)) << name;
  }
  fs::remove_all(root);
}

TEST(Inference, DeterministicAndDisIsInert) {
  Fixture f;
  model::Detector m(f.cfg.model_config(), 4);
  const auto& img = f.splits.target_test.images()[0].pixels;
  auto opt = f.cfg.infer_options();
  opt.score_threshold = 0.0;
  auto a = model::infer(m, img, opt), b = model::infer(m, img, opt);
  opt.dis = !opt.dis;
  auto c = model::infer(m, img, opt);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.size(), c.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].box, b[i].box);
    EXPECT_EQ(a[i].score, c[i].score);
    EXPECT_EQ(a[i].box, c[i].box);
  }
}

TEST(Config, EmptyTextGivesDefaults) {
  EXPECT_EQ(train::to_text(train::parse_config_text("")), train::to_text(Config{}));
  EXPECT_EQ(train::to_text(train::parse_config_text("# only a comment\n\n")), train::to_text(Config{}));
}

TEST(Config, OverridesAndRoundTrip) {
  auto cfg = train::parse_config_text("lr = 0.02\nmua = false  # off\nbackbone_widths = 4, 8\n");
  EXPECT_DOUBLE_EQ(cfg.lr, 0.02);
  EXPECT_FALSE(cfg.mua);
  EXPECT_EQ(cfg.backbone_widths, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(train::to_text(train::parse_config_text(train::to_text(cfg))), train::to_text(cfg));
  for (const auto& key : train::config_keys()) {
    Config c;
    train::set_value(c, key, train::get_value(cfg, key));
    EXPECT_EQ(train::get_value(c, key), train::get_value(cfg, key)) << key;
  }
}

TEST(Config, ErrorsCarryLineNumbers) {
  try {
    train::parse_config_text("lr = 0.1\n\nmomentum 0.9\n", "run.cfg");
    FAIL();
  } catch (const train::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(train::parse_config_text("bogus = 1\n"), train::ConfigError);
  EXPECT_THROW(train::parse_config_text("iterations = -3\n"), train::ConfigError);
  EXPECT_THROW(train::parse_config_text("attention = sideways\n"), train::ConfigError);
  Config bad;
  bad.momentum = 1.0;
  EXPECT_THROW(bad.validate(), train::ConfigError);
  bad = {};
  bad.n_min = bad.top_n + 1;
  EXPECT_THROW(bad.validate(), train::ConfigError);
}

TEST(Analysis, CsvHeaders) {
  train::CorrelationReport r;
  r.rows = {{0, 0.4, 0.5}};
  EXPECT_EQ(r.to_csv().substr(0, 23), "image,hardness,recall\n0");
  std::vector<train::StepRecord> steps(2);
  steps[1].iteration = 1;
  steps[1].n_final = 12;
  const auto csv = train::trajectory_csv(steps);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,hardness,kl,n_final");
  EXPECT_NE(csv.find("\n1,0,0,12"), std::string::npos) << csv;
}
