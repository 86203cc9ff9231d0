#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hetmarket/network.hpp"

using namespace hetmarket;

TEST(Orthogonal, SquareLayerIsScaledOrthogonal) {
  std::mt19937_64 rng(3);
  const double gain = std::sqrt(2.0);
  const Eigen::MatrixXd w = orthogonal_matrix(16, 16, gain, rng);
  const Eigen::MatrixXd wtw = w.transpose() * w;
  EXPECT_LT((wtw - gain * gain * Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(InitParams, InputLayerSingularValuesEqualGain) {
  const PolicyParams p = init_params(64, 5);
  const Eigen::MatrixXd& w = p.actor.layers()[0].weight;
  ASSERT_EQ(w.rows(), 64);
  ASSERT_EQ(w.cols(), 11);
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(w).singularValues();
  ASSERT_EQ(s.size(), 11);
  for (Eigen::Index i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], std::sqrt(2.0), 1e-6);
}

TEST(InitParams, OrthogonalLayersZeroBiasesAndDeterminism) {
  const PolicyParams a = init_params(8, 42), b = init_params(8, 42), c = init_params(8, 43);
  EXPECT_EQ(a.actor_vector(), b.actor_vector());
  EXPECT_EQ(a.critic_vector(), b.critic_vector());
  EXPECT_NE(a.actor_vector(), c.actor_vector());
  for (const Mlp* net : {&a.actor, &a.critic}) {
    for (const DenseLayer& l : net->layers()) {
      EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
      const Eigen::MatrixXd& w = l.weight;
      const Eigen::MatrixXd g = w.rows() >= w.cols() ? Eigen::MatrixXd(w.transpose() * w)
                                                     : Eigen::MatrixXd(w * w.transpose());
      const double scale = g(0, 0);
      EXPECT_LT((g - scale * Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(),
                1e-10);
    }
  }
  EXPECT_THROW(init_params(0, 1), std::invalid_argument);
}

TEST(PolicyForward, ZeroNetwork) {
  const PolicyParams p = zero_params(4);
  const PolicyOutput out = policy_forward(p, Eigen::VectorXd::Constant(11, 3.0));
  EXPECT_EQ(out.mean, Eigen::Vector2d::Zero());
  EXPECT_EQ(out.std, Eigen::Vector2d::Ones());
}

TEST(PolicyForward, PureAndLipschitz) {
  const PolicyParams p = init_params(16, 9);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd x(11);
  for (Eigen::Index i = 0; i < 11; ++i) x[i] = n(rng);
  EXPECT_EQ(policy_forward(p, x).mean, policy_forward(p, x).mean);

  double lipschitz = 1.0;
  for (const DenseLayer& l : p.actor.layers())
    lipschitz *= Eigen::JacobiSVD<Eigen::MatrixXd>(l.weight).singularValues()[0];
  const double delta = 1e-6;
  for (Eigen::Index i = 0; i < 11; ++i) {
    Eigen::VectorXd y = x;
    y[i] += delta;
    const double change = (policy_forward(p, y).mean - policy_forward(p, x).mean).norm();
    EXPECT_LE(change, lipschitz * delta * (1 + 1e-9));
  }
}

TEST(PolicyForward, LogStdIsBounded) {
  PolicyParams p = zero_params(2);
  p.log_std << -20.0, 7.0;
  const PolicyOutput out = policy_forward(p, Eigen::VectorXd::Zero(11));
  EXPECT_DOUBLE_EQ(out.std[0], std::exp(kLogStdMin));
  EXPECT_DOUBLE_EQ(out.std[1], std::exp(kLogStdMax));
}

TEST(SampleAction, DegenerateStdGivesTanhMean) {
  std::mt19937_64 rng(2);
  const Eigen::Vector2d mean(0.4, -1.3);
  const SampledAction s = sample_action(mean, Eigen::Vector2d::Constant(1e-12), rng);
  EXPECT_NEAR(s.action.scaled_volume, std::tanh(0.4), 1e-10);
  EXPECT_NEAR(s.action.scaled_margin, std::tanh(-1.3), 1e-10);
}

TEST(SampleAction, LogprobMatchesDensityAtSample) {
  std::mt19937_64 rng(3);
  const Eigen::Vector2d mean(0.2, 0.5), std(0.7, 1.1);
  for (int i = 0; i < 100; ++i) {
    const SampledAction s = sample_action(mean, std, rng);
    EXPECT_NEAR(s.logprob, squashed_logprob(s.raw, mean, std), 1e-12);
    EXPECT_EQ(s.action.scaled_volume, std::tanh(s.raw[0]));
    ASSERT_TRUE(std::isfinite(s.logprob));
  }
}

TEST(SampleAction, MonteCarloMeanMatchesQuadrature) {
  const double m = 0.6, sd = 0.8;
  // Expected tanh(X), X ~ N(m, sd^2), by the midpoint rule over +-10 sd.
  double expected = 0.0;
  const int steps = 200000;
  const double lo = m - 10 * sd, h = 20 * sd / steps;
  for (int i = 0; i < steps; ++i) {
    const double x = lo + (i + 0.5) * h;
    const double z = (x - m) / sd;
    expected += std::tanh(x) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * M_PI)) * h;
  }
  std::mt19937_64 rng(4);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i)
    sum += sample_action(Eigen::Vector2d(m, 0.0), Eigen::Vector2d(sd, 1.0), rng).action.scaled_volume;
  EXPECT_NEAR(sum / n, expected, 0.01 * std::abs(expected));
}

TEST(SampleAction, SquashedDensityIntegratesToOne) {
  const Eigen::Vector2d mean(0.3, -0.5), std(0.6, 0.9);
  const int n = 1500;
  const double h = 2.0 / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a0 = -1.0 + (i + 0.5) * h;
    for (int j = 0; j < n; ++j) {
      const double a1 = -1.0 + (j + 0.5) * h;
      total += std::exp(squashed_logprob(Eigen::Vector2d(std::atanh(a0), std::atanh(a1)), mean, std));
    }
  }
  EXPECT_NEAR(total * h * h, 1.0, 1e-3);
}

TEST(LogOneMinusTanhSq, StableForLargeInputs) {
  for (double x : {0.0, 0.5, -2.0, 10.0}) EXPECT_NEAR(log_one_minus_tanh_sq(x), -2.0 * std::log(std::cosh(x)), 1e-9);
  EXPECT_NEAR(log_one_minus_tanh_sq(40.0), std::log(4.0) - 80.0, 1e-9);
}

TEST(HiddenActivations, Examples) {
  const PolicyParams zero = zero_params(5);
  Eigen::MatrixXd obs = Eigen::MatrixXd::Random(7, 11);
  EXPECT_EQ(hidden_activations(zero, obs, 1).cwiseAbs().maxCoeff(), 0.0);

  const PolicyParams p = init_params(6, 3);
  obs.row(3) = obs.row(1);
  const Eigen::MatrixXd h = hidden_activations(p, obs, 2);
  EXPECT_EQ(h.rows(), 7);
  EXPECT_EQ(h.cols(), 6);
  EXPECT_EQ(h.row(1), h.row(3));
  EXPECT_THROW(hidden_activations(p, obs, 3), std::invalid_argument);
  EXPECT_THROW(hidden_activations(p, obs, 0), std::invalid_argument);
}

TEST(HiddenActivations, BoundedOnRandomInputs) {
  const PolicyParams p = init_params(32, 8);
  const Eigen::MatrixXd obs = 50.0 * Eigen::MatrixXd::Random(500, 11);
  for (int layer : {1, 2}) {
    const Eigen::MatrixXd h = hidden_activations(p, obs, layer);
    EXPECT_LE(h.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_TRUE(h.allFinite());
  }
}

TEST(PolicyParams, VectorRoundTrip) {
  PolicyParams p = init_params(5, 1);
  const Eigen::VectorXd a = p.actor_vector(), c = p.critic_vector();
  EXPECT_EQ(static_cast<std::size_t>(a.size()), p.actor_parameter_count());
  PolicyParams q = zero_params(5);
  q.set_actor_vector(a);
  q.set_critic_vector(c);
  EXPECT_EQ(q.actor_vector(), a);
  EXPECT_EQ(q.critic_vector(), c);
  EXPECT_THROW(q.set_actor_vector(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}
