#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hetmarket/ppo.hpp"
#include "oracles.hpp"

using namespace hetmarket;

namespace {

Eigen::VectorXd random_obs(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd x(11);
  for (Eigen::Index i = 0; i < 11; ++i) x[i] = n(rng);
  return x;
}

RolloutBuffer random_buffer(const PolicyParams& p, int size, std::uint64_t seed,
                            double logprob_jitter = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RolloutBuffer buf(1, static_cast<std::size_t>(size));
  Eigen::VectorXd obs = random_obs(rng);
  for (int i = 0; i < size; ++i) {
    Transition t;
    t.obs = obs;
    const PolicyOutput out = policy_forward(p, obs);
    const SampledAction a = sample_action(out.mean, out.std, rng);
    t.raw_action = a.raw;
    t.logprob = a.logprob + logprob_jitter * n(rng);
    t.reward = n(rng);
    t.next_obs = random_obs(rng);
    obs = t.next_obs;
    buf.push(t);
  }
  return buf;
}

PolicyParams constant_critic(int h, double value) {
  PolicyParams p = zero_params(h);
  p.critic.layers().back().bias[0] = value;
  return p;
}

}  // namespace

TEST(Advantages, MyopicDiscountIsOneStep) {
  const PolicyParams p = init_params(6, 1);
  const RolloutBuffer buf = random_buffer(p, 10, 2);
  const Advantages a = compute_advantages(buf, p, 0.0, 0.95);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const Transition& t = buf.transitions()[i];
    EXPECT_NEAR(a.raw[static_cast<Eigen::Index>(i)], t.reward - value_forward(p, t.obs), 1e-12);
  }
}

TEST(Advantages, PerfectCriticGivesZero) {
  const double r = 0.7, gamma = 0.9;
  const PolicyParams p = constant_critic(4, r / (1 - gamma));
  RolloutBuffer buf(1, 16);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 16; ++i) {
    Transition t;
    t.obs = random_obs(rng);
    t.next_obs = random_obs(rng);
    t.reward = r;
    buf.push(t);
  }
  const Advantages a = compute_advantages(buf, p, gamma, 0.95);
  EXPECT_LT(a.raw.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Advantages, LambdaOneIsDiscountedReturnMinusValue) {
  const PolicyParams p = init_params(6, 3);
  const RolloutBuffer buf = random_buffer(p, 12, 4);
  const double gamma = 0.93;
  const Advantages a = compute_advantages(buf, p, gamma, 1.0);
  const auto& ts = buf.transitions();
  const std::size_t n = ts.size();
  for (std::size_t i = 0; i < n; ++i) {
    double g = 0.0, disc = 1.0;
    for (std::size_t k = i; k < n; ++k) {
      g += disc * ts[k].reward;
      disc *= gamma;
    }
    g += disc * value_forward(p, ts[n - 1].next_obs);
    EXPECT_NEAR(a.raw[static_cast<Eigen::Index>(i)], g - value_forward(p, ts[i].obs), 1e-10);
  }
  EXPECT_NEAR(a.normalized.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(a.normalized.array().square().mean()), 1.0, 1e-12);
}

TEST(Advantages, EpisodeBoundaryRestartsRecursion) {
  const PolicyParams p = init_params(4, 5);
  RolloutBuffer buf = random_buffer(p, 6, 6);
  RolloutBuffer split(1, 6);
  for (std::size_t i = 0; i < 6; ++i) {
    Transition t = buf.transitions()[i];
    t.episode = i < 3 ? 0 : 1;
    split.push(t);
  }
  RolloutBuffer head(1, 3);
  for (std::size_t i = 0; i < 3; ++i) head.push(buf.transitions()[i]);
  const Advantages whole = compute_advantages(split, p, 0.9, 0.8);
  const Advantages first = compute_advantages(head, p, 0.9, 0.8);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(whole.raw[i], first.raw[i], 1e-14);
}

TEST(Advantages, TransitionDiscountOverridesArgument) {
  const PolicyParams p = init_params(4, 7);
  RolloutBuffer buf = random_buffer(p, 5, 8);
  RolloutBuffer tagged(1, 5);
  for (Transition t : buf.transitions()) {
    t.gamma = 0.0;
    tagged.push(t);
  }
  const Advantages a = compute_advantages(tagged, p, 0.99, 0.9);
  const Advantages b = compute_advantages(buf, p, 0.0, 0.9);
  EXPECT_LT((a.raw - b.raw).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Advantages, EmptyBufferRejected) {
  const PolicyParams p = zero_params(2);
  RolloutBuffer buf(1, 4);
  EXPECT_THROW(compute_advantages(buf, p, 0.9, 0.9), std::invalid_argument);
  EXPECT_THROW(RolloutBuffer(1, 0), std::invalid_argument);
}

namespace {

ActorBatch batch_from(const PolicyParams& p, const RolloutBuffer& buf, const Eigen::VectorXd& adv) {
  (void)p;
  const auto& ts = buf.transitions();
  ActorBatch b;
  const auto n = static_cast<Eigen::Index>(ts.size());
  b.obs.resize(11, n);
  b.raw_actions.resize(2, n);
  b.old_logprob.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.obs.col(i) = ts[static_cast<std::size_t>(i)].obs;
    b.raw_actions.col(i) = ts[static_cast<std::size_t>(i)].raw_action;
    b.old_logprob[i] = ts[static_cast<std::size_t>(i)].logprob;
  }
  b.advantages = adv;
  return b;
}

}  // namespace

TEST(ActorLoss, UnitRatioMakesClippingIrrelevant) {
  const PolicyParams p = init_params(4, 1);
  const RolloutBuffer buf = random_buffer(p, 8, 2);
  std::mt19937_64 rng(3);
  Eigen::VectorXd adv(8);
  for (Eigen::Index i = 0; i < 8; ++i) adv[i] = random_obs(rng)[0];
  const ActorBatch b = batch_from(p, buf, adv);
  const LossAndGradient loose = actor_loss(p, b, 0.999, 0.01);
  const LossAndGradient tight = actor_loss(p, b, 0.001, 0.01);
  const double expected = -adv.mean() - 0.01 * gaussian_entropy(p.log_std);
  EXPECT_NEAR(loose.loss, expected, 1e-12);
  EXPECT_NEAR(tight.loss, expected, 1e-12);
  EXPECT_EQ(loose.clip_fraction, 0.0);
}

TEST(ActorLoss, ZeroAdvantageLeavesEntropyTerm) {
  const PolicyParams p = init_params(4, 2);
  const RolloutBuffer buf = random_buffer(p, 8, 3, 0.5);
  const ActorBatch b = batch_from(p, buf, Eigen::VectorXd::Zero(8));
  const LossAndGradient l = actor_loss(p, b, 0.2, 0.05);
  EXPECT_NEAR(l.loss, -0.05 * gaussian_entropy(p.log_std), 1e-14);
}

namespace {

void check_gradients(double logprob_jitter, std::uint64_t seed) {
  PolicyParams p = init_params(4, seed, {1.4142135623730951, 1.0, 1.0});
  p.log_std << -0.3, 0.2;
  const RolloutBuffer buf = random_buffer(p, 8, seed + 1, logprob_jitter);
  std::mt19937_64 rng(seed + 2);
  Eigen::VectorXd adv(8);
  for (Eigen::Index i = 0; i < 8; ++i) adv[i] = random_obs(rng)[0];
  const ActorBatch b = batch_from(p, buf, adv);

  const LossAndGradient a = actor_loss(p, b, 0.2, 0.01);
  const auto actor_f = [&](const Eigen::VectorXd& v) {
    PolicyParams q = p;
    q.set_actor_vector(v);
    return actor_loss(q, b, 0.2, 0.01).loss;
  };
  const Eigen::VectorXd num_a = oracle::numeric_gradient(actor_f, p.actor_vector(), 1e-6);
  EXPECT_LT(oracle::max_relative_error(a.gradient, num_a, 1e-6), 1e-4);

  Eigen::VectorXd returns(8);
  for (Eigen::Index i = 0; i < 8; ++i) returns[i] = random_obs(rng)[1];
  const LossAndGradient c = critic_loss(p, b.obs, returns);
  const auto critic_f = [&](const Eigen::VectorXd& v) {
    PolicyParams q = p;
    q.set_critic_vector(v);
    return critic_loss(q, b.obs, returns).loss;
  };
  const Eigen::VectorXd num_c = oracle::numeric_gradient(critic_f, p.critic_vector(), 1e-6);
  EXPECT_LT(oracle::max_relative_error(c.gradient, num_c, 1e-6), 1e-4);
}

}  // namespace

TEST(GradientCheck, UnclippedRegime) { check_gradients(0.02, 10); }

TEST(GradientCheck, PartlyClippedRegime) { check_gradients(0.6, 20); }

TEST(ActorLoss, NegativeGradientIsDescentDirection) {
  const PolicyParams p = init_params(4, 30);
  const RolloutBuffer buf = random_buffer(p, 16, 31, 0.3);
  std::mt19937_64 rng(32);
  Eigen::VectorXd adv(16);
  for (Eigen::Index i = 0; i < 16; ++i) adv[i] = random_obs(rng)[0];
  const ActorBatch b = batch_from(p, buf, adv);
  const LossAndGradient l = actor_loss(p, b, 0.2, 0.01);
  PolicyParams q = p;
  q.set_actor_vector(p.actor_vector() - 1e-6 * l.gradient);
  EXPECT_LT(actor_loss(q, b, 0.2, 0.01).loss, l.loss);
}

TEST(PpoLearner, UpdateConsumesBufferAndReportsStats) {
  PolicyParams p = init_params(8, 1);
  RolloutBuffer buf = random_buffer(p, 32, 2);
  PPOConfig cfg;
  cfg.minibatch = 8;
  PpoLearner learner(p, cfg);
  std::mt19937_64 rng(3);
  const Eigen::VectorXd before = p.actor_vector();
  double mean = 0.0;
  for (const Transition& t : buf.transitions()) mean += t.reward / 32.0;
  const UpdateStats s = learner.update(buf, 0.9, rng);
  EXPECT_TRUE(buf.empty());
  EXPECT_NEAR(s.mean_reward, mean, 1e-12);
  EXPECT_NE(p.actor_vector(), before);
  EXPECT_TRUE(p.actor_vector().allFinite());
  EXPECT_GT(s.entropy, 0.0);
}

TEST(PpoLearner, CriticLossDropsOnRepeatedFit) {
  PolicyParams p = init_params(8, 5);
  PPOConfig cfg;
  cfg.minibatch = 16;
  cfg.epochs = 10;
  cfg.critic_lr = 1e-2;
  PpoLearner learner(p, cfg);
  std::mt19937_64 rng(6);
  const RolloutBuffer fixed = random_buffer(p, 16, 7);
  std::vector<double> losses;
  for (int k = 0; k < 30; ++k) {
    RolloutBuffer buf = fixed;
    losses.push_back(learner.update(buf, 0.0, rng).critic_loss);
  }
  EXPECT_LT(losses.back(), 0.5 * losses.front());
}

TEST(PpoLearner, NonFiniteLossAborts) {
  PolicyParams p = init_params(4, 1);
  RolloutBuffer buf = random_buffer(p, 8, 2);
  RolloutBuffer bad(1, 8);
  for (Transition t : buf.transitions()) {
    t.reward = std::nan("");
    bad.push(t);
  }
  PpoLearner learner(p, PPOConfig{});
  std::mt19937_64 rng(1);
  const Eigen::VectorXd before = p.actor_vector();
  EXPECT_THROW(learner.update(bad, 0.9, rng), NonFiniteLossError);
  EXPECT_EQ(p.actor_vector(), before);
}

TEST(PPOConfig, Validation) {
  PPOConfig c;
  EXPECT_NO_THROW(c.validate());
  c.clip_epsilon = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.actor_lr = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.gae_lambda = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.optimizer = "rmsprop";
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(ObservationNormalizer, RunningMomentsMatchBatch) {
  ObservationNormalizer norm;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(3.0, 2.0);
  std::vector<Observation> all;
  for (int i = 0; i < 1000; ++i) {
    Observation o;
    for (double& x : o) x = n(rng);
    norm.update(o);
    all.push_back(o);
  }
  for (std::size_t k = 0; k < kObservationSize; ++k) {
    double m = 0.0;
    for (const auto& o : all) m += o[k] / 1000.0;
    double v = 0.0;
    for (const auto& o : all) v += (o[k] - m) * (o[k] - m) / 1000.0;
    EXPECT_NEAR(norm.mean()[static_cast<Eigen::Index>(k)], m, 1e-10);
    EXPECT_NEAR(norm.var()[static_cast<Eigen::Index>(k)], v, 1e-9);
  }
  Observation big;
  big.fill(1e9);
  EXPECT_EQ(norm.normalize(big).maxCoeff(), ObservationNormalizer::kClip);
}

TEST(RewardScaler, DividesByStdOfDiscountedReturns) {
  RewardScaler scaler(2);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(-3.0, 5.0);
  const double gammas[2] = {0.9, 0.5};
  double g[2] = {0.0, 0.0};
  std::vector<double> history;
  EXPECT_EQ(scaler.scale(0, 7.0, 0.9), 7.0);  // no spread yet
  g[0] = 7.0;
  history.push_back(7.0);
  for (int i = 0; i < 500; ++i) {
    const std::size_t a = static_cast<std::size_t>(i % 2);
    const double r = n(rng);
    g[a] = gammas[a] * g[a] + r;
    history.push_back(g[a]);
    double m = 0.0, v = 0.0;
    for (double x : history) m += x / static_cast<double>(history.size());
    for (double x : history) v += (x - m) * (x - m) / static_cast<double>(history.size());
    const double scaled = scaler.scale(a, r, gammas[a]);
    ASSERT_NEAR(scaled, r / std::sqrt(v + 1e-8), 1e-9 * std::abs(r) + 1e-12);
    ASSERT_EQ(std::signbit(scaled), std::signbit(r));
  }
  scaler.reset_returns();
  const double before = scaler.std();
  scaler.scale(1, 0.0, 0.5);  // return restarts from zero
  EXPECT_GT(scaler.std(), 0.0);
  EXPECT_NE(scaler.std(), before);
}
