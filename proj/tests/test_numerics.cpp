// Copyright 2026 The StructPose Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "checks.hpp"

namespace {

using namespace sp_test;

LayerParams identity2() { return {Tensor({2, 2}, {1, 0, 0, 1}), {0, 0}}; }

TEST(FullyConnected, IdentityWeights) {
  EXPECT_EQ(fully_connected(Tensor({2}, {1, 2}), identity2(), Activation::relu).to_vector(), (std::vector<double>{1, 2}));
}

TEST(FullyConnected, ReluClampsNegatives) {
  EXPECT_EQ(fully_connected(Tensor({2}, {-3, 0.5}), identity2(), Activation::relu).to_vector(),
            (std::vector<double>{0, 0.5}));
}

TEST(FullyConnected, TanhHandEvaluation) {
  const LayerParams p{Tensor({2, 2}, {1, 1, 2, 0}), {0.1, 0}};
  const Tensor y = fully_connected(Tensor({2}, {0.2, -0.1}), p, Activation::tanh);
  EXPECT_DOUBLE_EQ(y[0], std::tanh(1 * 0.2 + 1 * -0.1 + 0.1));
  EXPECT_DOUBLE_EQ(y[1], std::tanh(2 * 0.2 + 0 * -0.1 + 0.0));
}

TEST(FullyConnected, MatchesScalarOracle) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const std::size_t in = uniform_int(rng, 1, 20), out = uniform_int(rng, 1, 20);
    const Tensor x = random_tensor({in}, rng);
    const LayerParams p = random_fc(out, in, rng);
    for (Activation act : {Activation::relu, Activation::tanh, Activation::linear}) {
      const Tensor y = fully_connected(x, p, act);
      const auto expect = oracle_fc(x.values(), p, act);
      for (std::size_t j = 0; j < out; ++j) EXPECT_NEAR(y[j], expect[j], 1e-12);
    }
  }
}

TEST(FullyConnected, RejectsShapeMismatch) {
  try {
    fully_connected(Tensor({3}), identity2(), Activation::linear);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("[3]"), std::string::npos) << e.what();
  }
}

TEST(FullyConnected, BiasGradientIsUpstream) {
  const LayerParams p{Tensor({1, 2}, {0.3, -0.7}), {0.2}};
  const Tensor x({2}, {1.5, 2.0});
  const Tensor y = fully_connected(x, p, Activation::linear);
  const GradientBundle g = fully_connected_backward(x, y, p, Activation::linear, Tensor({1}, {1.0}));
  EXPECT_EQ(g.params.bias[0], 1.0);
}

TEST(FullyConnected, DeadReluBlocksGradient) {
  const LayerParams p{Tensor({1, 1}, {1.0}), {0.0}};
  const Tensor x({1}, {-2.0});
  const Tensor y = fully_connected(x, p, Activation::relu);
  const GradientBundle g = fully_connected_backward(x, y, p, Activation::relu, Tensor({1}, {1.0}));
  EXPECT_EQ(g.input[0], 0.0);
  EXPECT_EQ(g.params.weights[0], 0.0);
  EXPECT_EQ(g.params.bias[0], 0.0);
}

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({1, 3, 3}, rng);
  const LayerParams f{Tensor({1, 1, 1, 1}, {1.0}), {0.0}};
  EXPECT_EQ(conv2d(x, f), x);
}

TEST(Conv2d, ZeroInputGivesBias) {
  std::mt19937_64 rng(2);
  const LayerParams f = random_filters(3, 2, 3, rng);
  const Tensor y = conv2d(Tensor({2, 6, 5}), f);
  ASSERT_EQ(y.shape(), (Shape{3, 4, 3}));
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(y[o * 12 + i], f.bias[o]);
  }
}

TEST(Conv2d, NaiveOracleRandom2x8x8) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({2, 8, 8}, rng);
  const LayerParams f = random_filters(3, 2, 3, rng);
  EXPECT_EQ(conv2d(x, f), oracle_conv(x, f, 1));
}

TEST(Conv2d, NaiveOracleSweep) {
  for (std::uint64_t s = 0; s < 300; ++s) EXPECT_TRUE(conv_matches_oracle(s)) << "seed " << s;
}

TEST(Conv2d, BatchedEqualsPerSample) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({3, 2, 9, 7}, rng);
  const LayerParams f = random_filters(4, 2, 3, rng);
  const Tensor y = conv2d(x, f);
  for (std::size_t n = 0; n < 3; ++n) {
    Tensor xn({2, 9, 7});
    std::copy_n(x.data() + n * xn.size(), xn.size(), xn.data());
    const Tensor yn = oracle_conv(xn, f, 1);
    for (std::size_t i = 0; i < yn.size(); ++i) EXPECT_EQ(y[n * yn.size() + i], yn[i]);
  }
}

TEST(Conv2d, RejectsOversizedFilter) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(conv2d(Tensor({1, 2, 2}), random_filters(1, 1, 3, rng)), std::invalid_argument);
  EXPECT_THROW(conv2d(Tensor({2, 5, 5}), random_filters(1, 1, 3, rng)), std::invalid_argument);
}

TEST(MaxPool, SingleWindow) {
  const PoolResult r = maxpool2d(Tensor({1, 2, 2}, {1, 2, 3, 4}), 2);
  EXPECT_EQ(r.output.to_vector(), (std::vector<double>{4}));
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{3}));
}

TEST(MaxPool, ConstantInputFirstIndexTie) {
  const PoolResult r = maxpool2d(Tensor({1, 4, 4}, 7.0), 2);
  EXPECT_EQ(r.output.to_vector(), (std::vector<double>(4, 7.0)));
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{0, 2, 8, 10}));
}

TEST(MaxPool, NaiveOracleRandom6x6) {
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor({1, 6, 6}, rng);
  std::vector<std::size_t> am;
  const Tensor expect = oracle_pool(x, 2, &am);
  const PoolResult r = maxpool2d(x, 2);
  EXPECT_EQ(r.output, expect);
  EXPECT_EQ(r.argmax, am);
}

TEST(MaxPool, NaiveOracleSweep) {
  for (std::uint64_t s = 0; s < 300; ++s) EXPECT_TRUE(pool_matches_oracle(s)) << "seed " << s;
}

TEST(MaxPool, RejectsNonDivisible) { EXPECT_THROW(maxpool2d(Tensor({1, 5, 4}), 2), std::invalid_argument); }

TEST(MaxPool, BackwardRoutesToArgmax) {
  const Tensor x({1, 2, 2}, {1, 9, 3, 4});
  const PoolResult r = maxpool2d(x, 2);
  EXPECT_EQ(maxpool2d_backward(x.shape(), r.argmax, Tensor({1, 1, 1}, {2.5})).to_vector(),
            (std::vector<double>{0, 2.5, 0, 0}));
}

TEST(Dropout, EvalIsBitwiseIdentity) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({100}, rng);
  EXPECT_EQ(dropout(x, 0.75, Mode::eval, rng).output, x);
}

TEST(Dropout, ZeroRateIdentity) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({100}, rng);
  EXPECT_EQ(dropout(x, 0.0, Mode::train, rng).output, x);
}

TEST(Dropout, BinomialSurvivorStatistics) {
  std::mt19937_64 rng(9);
  const std::size_t n = 200000;
  const Tensor x = random_tensor({n}, rng, 0.5, 1.5);
  const Tensor y = dropout(x, 0.75, Mode::train, rng).output;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] != 0.0) {
      ++kept;
      EXPECT_EQ(y[i], 4.0 * x[i]);
    }
  }
  const double p = 0.25, sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
  EXPECT_LT(std::abs(static_cast<double>(kept) / static_cast<double>(n) - p), 3 * sigma);
}

TEST(Dropout, UnbiasedInExpectation) {
  std::mt19937_64 rng(10);
  const Tensor x({8}, {0.1, -0.4, 1.0, 2.0, -3.0, 0.5, 0.25, 1.5});
  const int trials = 40000;
  std::vector<double> sum(8, 0.0);
  for (int t = 0; t < trials; ++t) {
    const Tensor y = dropout(x, 0.75, Mode::train, rng).output;
    for (std::size_t i = 0; i < 8; ++i) sum[i] += y[i];
  }
  for (std::size_t i = 0; i < 8; ++i) {
    // Var of each draw is x^2 (1/(1-p) - 1) = 3 x^2.
    const double sigma = std::abs(x[i]) * std::sqrt(3.0 / trials);
    EXPECT_NEAR(sum[i] / trials, x[i], 4 * sigma);
  }
}

TEST(Dropout, RejectsRateOne) {
  std::mt19937_64 rng(0);
  EXPECT_THROW(dropout(Tensor({2}), 1.0, Mode::train, rng), std::invalid_argument);
  EXPECT_THROW(dropout(Tensor({2}), -0.1, Mode::eval, rng), std::invalid_argument);
}

TEST(CachedOps, BackwardBeforeForwardRejected) {
  EXPECT_THROW(FullyConnectedOp().backward(Tensor({1})), std::logic_error);
  EXPECT_THROW(ConvOp().backward(Tensor({1})), std::logic_error);
  EXPECT_THROW(MaxPoolOp().backward(Tensor({1})), std::logic_error);
  EXPECT_THROW(DropoutOp().backward(Tensor({1})), std::logic_error);
}

TEST(Gradients, FullyConnectedAllActivations) {
  for (std::uint64_t s = 0; s < 25; ++s) {
    for (Activation act : {Activation::relu, Activation::tanh, Activation::linear}) {
      EXPECT_LT(fd_fully_connected(s, act), 1e-4) << "seed " << s;
    }
  }
}

TEST(Gradients, Conv2d) {
  for (std::uint64_t s = 0; s < 25; ++s) EXPECT_LT(fd_conv2d(s), 1e-4) << "seed " << s;
}

TEST(Gradients, MaxPool) {
  for (std::uint64_t s = 0; s < 25; ++s) EXPECT_LT(fd_maxpool2d(s), 1e-4) << "seed " << s;
}

TEST(Gradients, Dropout) {
  for (std::uint64_t s = 0; s < 25; ++s) EXPECT_LT(fd_dropout(s), 1e-4) << "seed " << s;
}

TEST(Finite, LargeParametersStayFinite) {
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor({2, 3, 12, 12}, rng, -10, 10);
  LayerParams f = random_filters(4, 3, 3, rng);
  for (double& w : f.weights.values()) w *= 10;
  const Tensor y = conv2d(x, f);
  EXPECT_TRUE(y.all_finite());
  EXPECT_TRUE(conv2d_backward(x, f, 1, y).input.all_finite());
  LayerParams p = random_fc(5, 8, rng);
  for (double& w : p.weights.values()) w *= 10;
  const Tensor z = fully_connected(random_tensor({8}, rng, -10, 10), p, Activation::tanh);
  EXPECT_TRUE(z.all_finite());
}

}  // namespace
