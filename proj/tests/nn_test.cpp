#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pdppo/error.hpp"
#include "pdppo/nn/mlp.hpp"
#include "pdppo/nn/optimizer.hpp"

using namespace pdppo;
using nn::Matrix;
using nn::MlpNet;
using nn::Vector;

namespace {

MlpNet one_to_one(double w, double b) {
  MlpNet net({1, 1}, nn::Activation::tanh, nn::Head::linear);
  net.weights()[0](0, 0) = w;
  net.biases()[0](0) = b;
  return net;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// A 1x2 "network" whose gradient tape holds exactly [g0, g1].
nn::GradientTape two_entry_tape(double g0, double g1) {
  MlpNet net({2, 1}, nn::Activation::tanh, nn::Head::linear);
  nn::GradientTape tape(net);
  tape.weights[0](0, 0) = g0;
  tape.weights[0](0, 1) = g1;
  return tape;
}

}  // namespace

TEST(Forward, ZeroNetLinearHeadGivesZeros) {
  MlpNet net({3, 5, 2}, nn::Activation::tanh, nn::Head::linear);
  const Vector out = net.forward(vec({0.3, -2.0, 7.0}));
  EXPECT_EQ(out, Vector::Zero(2));
}

TEST(Forward, ZeroNetSoftmaxHeadIsUniform) {
  MlpNet net({3, 4}, nn::Activation::relu, nn::Head::softmax);
  const Vector out = net.forward(vec({1.0, 2.0, 3.0}));
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out(i), 0.25);
}

TEST(Forward, AffineOneToOne) {
  EXPECT_DOUBLE_EQ(one_to_one(2.0, 1.0).forward(vec({3.0}))(0), 7.0);
}

TEST(Forward, InputShapeMismatchThrows) {
  MlpNet net({3, 2}, nn::Activation::tanh, nn::Head::linear);
  EXPECT_THROW(net.forward(vec({1.0, 2.0})), ShapeError);
}

TEST(Forward, SoftmaxStaysOnSimplexForHugeLogits) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    MlpNet net({2, 6}, nn::Activation::tanh, nn::Head::softmax, {2, 4});
    for (Eigen::Index i = 0; i < net.weights()[0].size(); ++i) {
      net.weights()[0].data()[i] = uniform(rng, -1e4, 1e4);
    }
    const Vector p = net.forward(vec({uniform(rng, -50, 50), uniform(rng, -50, 50)}));
    ASSERT_TRUE(p.allFinite());
    EXPECT_TRUE((p.array() >= 0.0).all());
    EXPECT_NEAR(p.head(2).sum(), 1.0, 1e-9);
    EXPECT_NEAR(p.tail(4).sum(), 1.0, 1e-9);
  }
}

TEST(Backward, AffineDerivatives) {
  const MlpNet net = one_to_one(2.0, 1.0);
  Matrix x(1, 1);
  x << 3.0;
  nn::GradientTape tape(net);
  net.backward(net.forward_cached(x), Matrix::Ones(1, 1), tape);
  EXPECT_DOUBLE_EQ(tape.weights[0](0, 0), 3.0);
  EXPECT_DOUBLE_EQ(tape.biases[0](0), 1.0);
}

TEST(Backward, RepeatedCallsAccumulate) {
  const MlpNet net = one_to_one(2.0, 1.0);
  Matrix x(1, 1);
  x << 3.0;
  const auto cache = net.forward_cached(x);
  nn::GradientTape tape(net);
  net.backward(cache, Matrix::Ones(1, 1), tape);
  net.backward(cache, Matrix::Ones(1, 1), tape);
  EXPECT_DOUBLE_EQ(tape.weights[0](0, 0), 6.0);
  EXPECT_DOUBLE_EQ(tape.biases[0](0), 2.0);
  EXPECT_EQ(tape.accumulated, 2);
}

TEST(Backward, ZeroReluNetHasZeroHiddenGradients) {
  MlpNet net({3, 4, 2}, nn::Activation::relu, nn::Head::linear);
  Matrix x(3, 1);
  x << 1.0, -2.0, 0.5;
  nn::GradientTape tape(net);
  net.backward(net.forward_cached(x), Matrix::Ones(2, 1), tape);
  EXPECT_EQ(tape.weights[0], Matrix::Zero(4, 3));
  EXPECT_EQ(tape.biases[0], Vector::Zero(4));
  EXPECT_EQ(tape.weights[1], Matrix::Zero(2, 4));  // hidden outputs are relu(0) = 0
  EXPECT_EQ(tape.biases[1], Vector::Ones(2));
}

TEST(Backward, WithoutCachedForwardThrows) {
  const MlpNet net = one_to_one(1.0, 0.0);
  nn::GradientTape tape(net);
  EXPECT_THROW(net.backward(nn::ForwardCache{}, Matrix::Ones(1, 1), tape), StateError);
}

TEST(Backward, MatchesFiniteDifferencesOnRandomNets) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const MlpNet net = oracle::random_net(rng);
    const auto probe = oracle::random_probe(net, rng);
    const double err = oracle::max_relative_error(oracle::analytic_gradient(net, probe),
                                                  oracle::numeric_gradient(net, probe));
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}

TEST(Clip, BelowThresholdUnchanged) {
  const auto out = nn::clip_global_norm(two_entry_tape(3, 4), 10.0);
  EXPECT_DOUBLE_EQ(out.weights[0](0, 0), 3.0);
  EXPECT_DOUBLE_EQ(out.weights[0](0, 1), 4.0);
}

TEST(Clip, AtThresholdUnchanged) {
  const auto out = nn::clip_global_norm(two_entry_tape(3, 4), 5.0);
  EXPECT_DOUBLE_EQ(out.weights[0](0, 0), 3.0);
  EXPECT_DOUBLE_EQ(out.weights[0](0, 1), 4.0);
}

TEST(Clip, AboveThresholdRescaled) {
  const auto out = nn::clip_global_norm(two_entry_tape(3, 4), 1.0);
  EXPECT_NEAR(out.weights[0](0, 0), 0.6, 1e-15);
  EXPECT_NEAR(out.weights[0](0, 1), 0.8, 1e-15);
  EXPECT_NEAR(out.norm(), 1.0, 1e-12);
}

TEST(Clip, IsIdempotent) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const MlpNet net = oracle::random_net(rng);
    nn::GradientTape tape(net);
    for (auto& w : tape.weights) {
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -3, 3);
    }
    const double max_norm = uniform(rng, 0.01, 5.0);
    const auto once = nn::clip_global_norm(tape, max_norm);
    const auto twice = nn::clip_global_norm(once, max_norm);
    EXPECT_LE(once.norm(), max_norm + 1e-9);
    const auto a = once.flatten(), b = twice.flatten();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12 * max_norm);
  }
}

TEST(Clip, NonPositiveMaxNormRejected) {
  auto tape = two_entry_tape(1, 1);
  EXPECT_THROW(nn::clip_global_norm_inplace(tape, 0.0), ConfigError);
}

TEST(Optimizer, SgdStep) {
  MlpNet net = one_to_one(1.0, 0.0);
  nn::GradientTape tape(net);
  tape.weights[0](0, 0) = 2.0;
  nn::Optimizer opt(nn::OptimizerKind::sgd, 0.1);
  opt.apply_update(net, tape);
  EXPECT_DOUBLE_EQ(net.weights()[0](0, 0), 0.8);
}

TEST(Optimizer, AdamFirstStepFromZero) {
  MlpNet net = one_to_one(0.0, 0.0);
  nn::GradientTape tape(net);
  tape.weights[0](0, 0) = 1.0;
  nn::Optimizer opt(nn::OptimizerKind::adam, 0.001);
  opt.apply_update(net, tape);
  // Bias-corrected moments are m = 1, v = 1: step = lr / (1 + eps).
  EXPECT_NEAR(net.weights()[0](0, 0), -0.001 / (1.0 + 1e-8), 1e-18);
  EXPECT_EQ(opt.step_count(), 1);
}

TEST(Optimizer, ZeroGradientIsIdentity) {
  Rng rng(11);
  for (auto kind : {nn::OptimizerKind::sgd, nn::OptimizerKind::adam}) {
    MlpNet net = oracle::random_net(rng);
    const MlpNet before = net;
    nn::Optimizer opt(kind, 0.01);
    for (int i = 0; i < 3; ++i) opt.apply_update(net, nn::GradientTape(net));
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
      EXPECT_EQ(net.weights()[k], before.weights()[k]);
      EXPECT_EQ(net.biases()[k], before.biases()[k]);
    }
  }
}

TEST(Optimizer, ShapeMismatchThrows) {
  MlpNet net = one_to_one(0.0, 0.0);
  MlpNet other({2, 1}, nn::Activation::tanh, nn::Head::linear);
  nn::Optimizer opt(nn::OptimizerKind::adam, 0.001);
  EXPECT_THROW(opt.apply_update(net, nn::GradientTape(other)), ShapeError);
}

TEST(Optimizer, NonPositiveLearningRateRejected) {
  EXPECT_THROW(nn::Optimizer(nn::OptimizerKind::sgd, 0.0), ConfigError);
}
