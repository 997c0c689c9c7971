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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cida/nn/checkpoint.hpp"
#include "cida/nn/ops.hpp"
#include "cida/nn/optim.hpp"
#include "grad_check.hpp"
#include "op_checks.hpp"

using namespace cida::nn;
using cida::testing::grad_check;
using cida::testing::random_values;

namespace {

Tensor vec(std::vector<Real> v) {
  const std::size_t n = v.size();
  return Tensor::constant({n}, std::move(v));
}

}  // namespace

TEST(Tensor, ShapeValidation) {
  EXPECT_THROW(Tensor::constant({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::zeros({0, 3}), ShapeError);
  EXPECT_EQ(Tensor::zeros({2, 3}).numel(), 6u);
  EXPECT_THROW(Tensor::zeros({2}).item(), ContractError);
}

TEST(Tensor, FiniteCheck) {
  EXPECT_NO_THROW(vec({1.0, 2.0}).check_finite("ok"));
  EXPECT_THROW(vec({1.0, std::nan("")}).check_finite("bad"), NumericError);
}

TEST(BilinearResize, ConstantMapStaysConstant) {
  auto y = bilinear_resize(Tensor::full({1, 2, 2}, 7.0), 4, 4);
  ASSERT_EQ(y.shape(), (Shape{1, 4, 4}));
  for (Real v : y.values()) EXPECT_DOUBLE_EQ(v, 7.0);
}

TEST(BilinearResize, IdentityExtent) {
  std::mt19937 rng(1);
  auto x = Tensor::constant({2, 3, 5}, random_values(30, rng));
  auto y = bilinear_resize(x, 3, 5);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x[i], y[i]);
}

TEST(BilinearResize, MatchesScalarKernel) {
  // Independent evaluation: source coordinate (o + 0.5) * in/out - 0.5,
  // clamped at 0, linear interpolation with edge replication.
  const std::vector<Real> src{0.0, 1.0};
  std::vector<Real> expected;
  for (int o = 0; o < 4; ++o) {
    double s = std::max(0.0, (o + 0.5) * 2.0 / 4.0 - 0.5);
    int lo = static_cast<int>(s);
    int hi = std::min(lo + 1, 1);
    double f = s - lo;
    expected.push_back(src[lo] * (1 - f) + src[hi] * f);
  }
  // Frozen from the evaluation above.
  ASSERT_EQ(expected, (std::vector<Real>{0.0, 0.25, 0.75, 1.0}));
  auto y = bilinear_resize(Tensor::constant({1, 1, 2}, src), 1, 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y[i], expected[i], 1e-15);
}

TEST(BilinearResize, ZeroExtentIsError) {
  EXPECT_THROW(bilinear_resize(Tensor::zeros({1, 2, 2}), 0, 3), ShapeError);
}

TEST(GradientReversal, ForwardIsIdentity) {
  ParameterSet ps;
  auto x = ps.add("x", {2}, {1.5, -2.0});
  auto y = gradient_reversal(x->tensor());
  EXPECT_EQ(y[0], 1.5);
  EXPECT_EQ(y[1], -2.0);
}

TEST(GradientReversal, BackwardNegatesAndScales) {
  ParameterSet ps;
  auto x = ps.add("x", {2}, {0.3, 0.7});
  // loss = sum(grl(x) * g) has upstream gradient g at the GRL output.
  backprop(sum(mul(gradient_reversal(x->tensor()), vec({1.0, -2.0}))));
  EXPECT_EQ(x->gradient()[0], -1.0);
  EXPECT_EQ(x->gradient()[1], 2.0);

  auto z = ps.add("z", {1}, {9.0});
  backprop(sum(mul(gradient_reversal(z->tensor(), {0.5}), vec({4.0}))));
  EXPECT_EQ(z->gradient()[0], -2.0);
  EXPECT_THROW(gradient_reversal(z->tensor(), {-1.0}), ContractError);
}

TEST(Backprop, SumOfSquares) {
  ParameterSet ps;
  auto w = ps.add("w", {2}, {1.0, 2.0});
  backprop(sum(square(w->tensor())));
  EXPECT_DOUBLE_EQ(w->gradient()[0], 2.0);
  EXPECT_DOUBLE_EQ(w->gradient()[1], 4.0);
}

TEST(Backprop, SigmoidAtZero) {
  ParameterSet ps;
  auto w = ps.add("w", {1}, {0.0});
  backprop(sigmoid(w->tensor()));
  // sigma'(0) = sigma(0)(1 - sigma(0)) = 0.25
  EXPECT_DOUBLE_EQ(w->gradient()[0], 0.25);
}

TEST(Backprop, NonScalarLossIsContractError) {
  ParameterSet ps;
  auto w = ps.add("w", {2}, {1.0, 2.0});
  EXPECT_THROW(backprop(square(w->tensor())), ContractError);
}

TEST(Backprop, NanGradientIsNumericError) {
  ParameterSet ps;
  auto w = ps.add("w", {1}, {1.0});
  auto nan_scale = Tensor::constant({1}, {std::nan("")});
  EXPECT_THROW(backprop(sum(mul(w->tensor(), nan_scale))), NumericError);
}

TEST(Backprop, GradientsAccumulateAcrossLosses) {
  ParameterSet ps;
  auto w = ps.add("w", {1}, {3.0});
  backprop(sum(square(w->tensor())));
  backprop(sum(scale(w->tensor(), 5.0)));
  EXPECT_DOUBLE_EQ(w->gradient()[0], 11.0);
}

TEST(Backprop, EveryOpMatchesFiniteDifferences) {
  for (const auto& r : cida::testing::check_ops()) {
    EXPECT_LT(r.check.max_rel_error, 1e-4) << r.name << ": " << r.check.worst;
    EXPECT_GT(r.check.probes, 0u) << r.name;
  }
}

TEST(Backprop, ReversalCompositionIsExactNegation) {
  std::mt19937 rng(3);
  ParameterSet plain, reversed;
  auto init = random_values(12, rng);
  auto a = plain.add("a", {3, 4}, init);
  auto b = reversed.add("a", {3, 4}, init);
  auto w = Tensor::constant({2, 4}, random_values(8, rng));
  backprop(sum(sigmoid(linear(a->tensor(), w, Tensor()))));
  backprop(sum(sigmoid(linear(gradient_reversal(b->tensor(), {0.75}), w, Tensor()))));
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(b->gradient()[i], -0.75 * a->gradient()[i]);
}

TEST(Ops, ForwardIsDeterministicAndDoesNotMutateInputs) {
  std::mt19937 rng(9);
  auto x = Tensor::constant({3, 8, 8}, random_values(192, rng));
  auto w = Tensor::constant({4, 3, 3, 3}, random_values(108, rng));
  auto before = std::vector<Real>(x.values().begin(), x.values().end());
  auto y1 = conv2d(x, w, Tensor(), 2, 1);
  auto y2 = conv2d(x, w, Tensor(), 2, 1);
  EXPECT_TRUE(std::equal(y1.values().begin(), y1.values().end(), y2.values().begin()));
  EXPECT_TRUE(std::equal(before.begin(), before.end(), x.values().begin()));
}

TEST(SgdMomentum, PlainGradientDescent) {
  ParameterSet ps;
  auto p = ps.add("p", {1}, {1.0});
  p->gradient()[0] = 2.0;
  sgd_momentum_step(ps, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(p->value()[0], 0.8);
}

TEST(SgdMomentum, ZeroGradientIsFixedPoint) {
  ParameterSet ps;
  auto p = ps.add("p", {3}, {1.0, -2.0, 0.5});
  sgd_momentum_step(ps, 0.1, 0.9);
  EXPECT_EQ(p->value()[0], 1.0);
  EXPECT_EQ(p->value()[1], -2.0);
  EXPECT_EQ(p->value()[2], 0.5);
}

TEST(SgdMomentum, TwoStepsUnrolled) {
  // v1 = 1, p drops 0.1; v2 = 0.9 + 1 = 1.9, p drops 0.19.
  ParameterSet ps;
  auto p = ps.add("p", {1}, {0.0});
  p->gradient()[0] = 1.0;
  sgd_momentum_step(ps, 0.1, 0.9);
  EXPECT_NEAR(p->value()[0], -0.1, 1e-15);
  sgd_momentum_step(ps, 0.1, 0.9);
  EXPECT_NEAR(p->value()[0], -0.29, 1e-15);
  EXPECT_THROW(sgd_momentum_step(ps, 0.0, 0.9), ContractError);
  EXPECT_THROW(sgd_momentum_step(ps, 0.1, 1.0), ContractError);
}

TEST(Checkpoint, RoundTripsThroughFloat32) {
  ParameterSet ps;
  ps.add("conv.w", {2, 1, 1, 1}, {0.1, -3.25});
  ps.add("bias", {3}, {1.0, 2.0, 1e-3});
  auto path = std::filesystem::temp_directory_path() / "cida_ckpt_test.bin";
  write_checkpoint(path, snapshot(ps, 42, "lambda = 1\n"));
  auto data = read_checkpoint(path);
  EXPECT_EQ(data.iteration, 42u);
  EXPECT_EQ(data.config, "lambda = 1\n");
  ASSERT_EQ(data.arrays.size(), 2u);
  EXPECT_EQ(data.arrays[0].shape, (Shape{2, 1, 1, 1}));
  EXPECT_EQ(data.arrays[0].values[1], -3.25f);

  ParameterSet other;
  other.add("conv.w", {2, 1, 1, 1}, {0, 0});
  other.add("bias", {3}, {0, 0, 0});
  restore(data, other);
  EXPECT_EQ(other.all()[1]->value()[2], static_cast<double>(1e-3f));

  ParameterSet wrong;
  wrong.add("bias", {4}, {0, 0, 0, 0});
  EXPECT_THROW(restore(data, wrong), CheckpointError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsVersionMismatch) {
  auto path = std::filesystem::temp_directory_path() / "cida_ckpt_bad.bin";
  ParameterSet ps;
  ps.add("x", {1}, {1.0});
  write_checkpoint(path, snapshot(ps, 0, ""));
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    f.put(static_cast<char>(99));
  }
  EXPECT_THROW(read_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);
}
