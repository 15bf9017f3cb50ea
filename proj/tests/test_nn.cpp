#include "vdmarl/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "vdmarl/params.hpp"
#include "vdmarl/rng.hpp"
#include "vdmarl/tensor.hpp"

namespace vdmarl {
namespace {

std::vector<double> rand_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

void zero_params(ParameterSet& params) {
  params.restore_values(std::vector<double>(params.total_size(), 0.0));
}

TEST(Dense, IdentityWeights) {
  Rng rng(1);
  ParameterSet params;
  DenseLayer l = DenseLayer::create(params, "l", 3, 3, Activation::None, rng);
  params.restore_values({1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0});
  Tensor x = Tensor::of({2, 3}, {1, 2, 3, -4, 5, -6});
  Tensor out = l.forward(x);
  auto y = out.values();
  auto xin = x.values();
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(y[i], xin[i]);
}

TEST(Dense, BiasOnlyWithRelu) {
  Rng rng(1);
  ParameterSet params;
  DenseLayer l = DenseLayer::create(params, "l", 3, 2, Activation::Relu, rng);
  zero_params(params);
  l.bias.values_mut()[0] = 1.0;
  l.bias.values_mut()[1] = 2.0;
  Tensor x = Tensor::of({3, 3}, {9, 9, 9, -9, 0, 9, 1, 2, 3});
  Tensor out = l.forward(x);
  auto y = out.values();
  for (int r = 0; r < 3; ++r) {
    EXPECT_DOUBLE_EQ(y[r * 2 + 0], 1.0);
    EXPECT_DOUBLE_EQ(y[r * 2 + 1], 2.0);
  }
}

TEST(Dense, RandomVsAffineOracle) {
  Rng rng(3);
  ParameterSet params;
  DenseLayer l = DenseLayer::create(params, "l", 4, 2, Activation::None, rng);
  l.bias.values_mut()[0] = 0.3;
  l.bias.values_mut()[1] = -0.7;
  std::vector<double> xv = rand_vec(rng, 8);
  Tensor x = Tensor::of({2, 4}, xv);
  Tensor out = l.forward(x);
  auto y = out.values();
  auto w = l.weight.values();
  auto b = l.bias.values();
  for (int r = 0; r < 2; ++r) {
    for (int o = 0; o < 2; ++o) {
      double acc = b[o];
      for (int i = 0; i < 4; ++i) acc += xv[r * 4 + i] * w[o * 4 + i];
      EXPECT_NEAR(y[r * 2 + o], acc, 1e-12);
    }
  }
}

TEST(Dense, ShapeMismatchError) {
  Rng rng(1);
  ParameterSet params;
  DenseLayer l = DenseLayer::create(params, "l", 3, 2, Activation::None, rng);
  EXPECT_THROW(l.forward(Tensor::of({2, 4}, std::vector<double>(8, 0.0))), std::invalid_argument);
}

TEST(Dense, ZeroDimensionError) {
  Rng rng(1);
  ParameterSet params;
  EXPECT_THROW(DenseLayer::create(params, "l", 0, 2, Activation::None, rng),
               std::invalid_argument);
  EXPECT_THROW(DenseLayer::create(params, "l", 3, 0, Activation::None, rng),
               std::invalid_argument);
}

TEST(Gru, ZeroWeightsHalveHidden) {
  Rng rng(5);
  ParameterSet params;
  GruCell c = GruCell::create(params, "gru", 2, 3, rng);
  zero_params(params);
  Tensor x = Tensor::of({1, 2}, {0.4, -0.9});
  Tensor h = Tensor::of({1, 3}, {0.2, -0.6, 1.0});
  Tensor next = c.step(x, h);
  auto hn = next.values();
  // z = sigmoid(0) = 0.5 and the candidate is tanh(0) = 0, so h' = 0.5 h.
  EXPECT_NEAR(hn[0], 0.1, 1e-15);
  EXPECT_NEAR(hn[1], -0.3, 1e-15);
  EXPECT_NEAR(hn[2], 0.5, 1e-15);
}

TEST(Gru, LargeBiasesSaturate) {
  Rng rng(5);
  ParameterSet params;
  GruCell c = GruCell::create(params, "gru", 2, 3, rng);
  zero_params(params);
  for (double& v : c.bz.values_mut()) v = 10.0;
  for (double& v : c.bc.values_mut()) v = 10.0;
  Tensor x = Tensor::zeros({1, 2});
  Tensor h = Tensor::zeros({1, 3});
  Tensor next = c.step(x, h);
  auto hn = next.values();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(hn[i], 0.99995, 1e-3);
}

TEST(Gru, StepGradCheck) {
  Rng rng(7);
  ParameterSet params;
  GruCell c = GruCell::create(params, "gru", 3, 4, rng);
  Tensor x = Tensor::of({2, 3}, rand_vec(rng, 6));
  Tensor h = Tensor::of({2, 4}, rand_vec(rng, 8, -0.5, 0.5));
  auto f = [&]() { return sum(c.step(x, h)); };
  GradCheckReport rep = grad_check(f, params, 1e-5);
  EXPECT_LE(rep.max_rel_err, 1e-5) << rep.worst_coordinate;
}

// Hidden entries stay in (-1, 1) from h0 = 0: each step is a convex mix of a
// tanh output and the previous bounded state.
TEST(Gru, HiddenStaysBounded) {
  Rng rng(9);
  ParameterSet params;
  GruCell c = GruCell::create(params, "gru", 2, 4, rng);
  std::vector<double> big(params.total_size());
  for (double& v : big) v = rng.uniform(-3.0, 3.0);
  params.restore_values(big);
  Tensor h = Tensor::zeros({3, 4});
  for (int t = 0; t < 20; ++t) {
    Tensor x = Tensor::of({3, 2}, rand_vec(rng, 6, -5.0, 5.0));
    h = c.step(x, h);
    for (double v : h.values()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Gru, BatchMismatchError) {
  Rng rng(5);
  ParameterSet params;
  GruCell c = GruCell::create(params, "gru", 2, 3, rng);
  EXPECT_THROW(c.step(Tensor::zeros({2, 2}), Tensor::zeros({1, 3})), std::invalid_argument);
}

TEST(Init, FanInBounds) {
  Rng rng(11);
  ParameterSet params;
  DenseLayer l = DenseLayer::create(params, "l", 4, 16, Activation::None, rng);
  for (double v : l.weight.values()) {
    EXPECT_GE(v, -0.5);
    EXPECT_LE(v, 0.5);
  }
  for (double v : l.bias.values()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Init, SeedDeterminism) {
  auto build = [](uint64_t seed) {
    Rng rng(seed);
    ParameterSet params;
    DenseLayer::create(params, "l", 5, 7, Activation::None, rng);
    GruCell::create(params, "g", 7, 7, rng);
    return params.snapshot_values();
  };
  std::vector<double> a = build(42), b = build(42), c = build(43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(RmsProp, ZeroGradientLeavesParamsUnchanged) {
  ParameterSet params;
  params.add("w", Tensor::param({3}, {1.0, -2.0, 0.5}));
  RmsProp opt;
  opt.update(params, {{0.0, 0.0, 0.0}});
  std::vector<double> v = params.snapshot_values();
  EXPECT_EQ(v, (std::vector<double>{1.0, -2.0, 0.5}));
}

TEST(RmsProp, SingleScalarHandExample) {
  ParameterSet params;
  params.add("theta", Tensor::param({1}, {1.0}));
  RmsProp opt;  // lr 5e-4, decay 0.99, eps 1e-5
  opt.update(params, {{1.0}});
  // acc = 0.01, step = 5e-4 / sqrt(0.01 + 1e-5) = 4.99750e-3.
  double expect = 1.0 - 5e-4 / std::sqrt(0.01 + 1e-5);
  EXPECT_NEAR(params.read_flat(0), expect, 1e-12);
  EXPECT_NEAR(params.read_flat(0), 0.9950, 1e-4);
}

// With a constant gradient the accumulator converges to g^2, so the step size
// converges to lr / sqrt(g^2 + eps).
TEST(RmsProp, AccumulatorFixedPoint) {
  ParameterSet params;
  params.add("theta", Tensor::param({1}, {100.0}));
  RmsProp opt(5e-4, 0.99, 1e-5);
  double prev = params.read_flat(0);
  double step = 0.0;
  for (int i = 0; i < 2000; ++i) {
    opt.update(params, {{2.0}});
    step = prev - params.read_flat(0);
    prev = params.read_flat(0);
  }
  EXPECT_NEAR(step, 5e-4 * 2.0 / std::sqrt(4.0 + 1e-5), 1e-9);
}

TEST(RmsProp, NonFiniteGradientError) {
  ParameterSet params;
  params.add("w", Tensor::param({2}, {1.0, 2.0}));
  RmsProp opt;
  try {
    opt.update(params, {{1.0, std::nan("")}});
    FAIL() << "expected a non-finite gradient error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("w"), std::string::npos) << e.what();
  }
}

TEST(RmsProp, GradientListMismatchError) {
  ParameterSet params;
  params.add("w", Tensor::param({2}, {1.0, 2.0}));
  RmsProp opt;
  EXPECT_THROW(opt.update(params, {}), std::invalid_argument);
  EXPECT_THROW(opt.update(params, {{1.0}}), std::invalid_argument);
}

TEST(Clip, BelowThresholdUnchanged) {
  std::vector<std::vector<double>> g = {{3.0, 4.0}};  // norm 5
  double norm = clip_grad_norm(g, 10.0);
  EXPECT_DOUBLE_EQ(norm, 5.0);
  EXPECT_DOUBLE_EQ(g[0][0], 3.0);
  EXPECT_DOUBLE_EQ(g[0][1], 4.0);
}

TEST(Clip, ThreeFourFiveTriangle) {
  std::vector<std::vector<double>> g = {{3.0, 4.0}};
  double norm = clip_grad_norm(g, 1.0);
  EXPECT_DOUBLE_EQ(norm, 5.0);
  EXPECT_NEAR(g[0][0], 0.6, 1e-12);
  EXPECT_NEAR(g[0][1], 0.8, 1e-12);
}

TEST(Clip, PostClipNormBounded) {
  Rng rng(13);
  for (int it = 0; it < 100; ++it) {
    std::vector<std::vector<double>> g;
    for (int k = 0; k < 3; ++k) g.push_back(rand_vec(rng, 1 + rng.uniform_int(5), -9.0, 9.0));
    double max_norm = rng.uniform(0.5, 4.0);
    clip_grad_norm(g, max_norm);
    double sq = 0.0;
    for (const auto& vec : g)
      for (double v : vec) sq += v * v;
    EXPECT_LE(std::sqrt(sq), max_norm + 1e-12);
  }
}

TEST(Clip, NonPositiveMaxDisables) {
  std::vector<std::vector<double>> g = {{30.0, 40.0}};
  double norm = clip_grad_norm(g, 0.0);
  EXPECT_DOUBLE_EQ(norm, 50.0);
  EXPECT_DOUBLE_EQ(g[0][0], 30.0);
}

TEST(CollectGrads, ZeroForUnreachedParams) {
  ParameterSet params;
  Tensor a = params.add("a", Tensor::param({1}, {2.0}));
  params.add("unused", Tensor::param({2}, {1.0, 1.0}));
  backward(mul(a, a));
  auto grads = collect_grads(params);
  ASSERT_EQ(grads.size(), 2u);
  EXPECT_DOUBLE_EQ(grads[0][0], 4.0);
  EXPECT_DOUBLE_EQ(grads[1][0], 0.0);
  EXPECT_DOUBLE_EQ(grads[1][1], 0.0);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(17);
  ParameterSet params;
  params.add("w", Tensor::param({2, 3}, rand_vec(rng, 6)));
  params.add("b", Tensor::param({3}, rand_vec(rng, 3)));
  std::string path = (std::filesystem::temp_directory_path() / "vdmarl_ckpt_test.bin").string();
  save_checkpoint(params, path);

  ParameterSet loaded;
  loaded.add("w", Tensor::param({2, 3}, std::vector<double>(6, 0.0)));
  loaded.add("b", Tensor::param({3}, std::vector<double>(3, 0.0)));
  load_checkpoint(loaded, path);
  EXPECT_EQ(loaded.snapshot_values(), params.snapshot_values());

  ParameterSet wrong_shape;
  wrong_shape.add("w", Tensor::param({3, 2}, std::vector<double>(6, 0.0)));
  wrong_shape.add("b", Tensor::param({3}, std::vector<double>(3, 0.0)));
  EXPECT_THROW(load_checkpoint(wrong_shape, path), std::runtime_error);

  ParameterSet missing;
  missing.add("w", Tensor::param({2, 3}, std::vector<double>(6, 0.0)));
  EXPECT_THROW(load_checkpoint(missing, path), std::runtime_error);

  std::ofstream bad(path, std::ios::binary);
  bad << "NOTMAGIC";
  bad.close();
  EXPECT_THROW(load_checkpoint(loaded, path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace vdmarl
