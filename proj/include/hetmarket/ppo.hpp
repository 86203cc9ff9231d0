#pragma once

#include <Eigen/Dense>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetmarket/network.hpp"

namespace hetmarket {

struct PPOConfig {
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  double clip_epsilon = 0.2;
  int epochs = 4;
  int minibatch = 64;
  double gae_lambda = 0.95;
  double entropy_coef = 1e-3;
  double grad_clip = 0.5;
  std::string optimizer = "adam";  // "adam" or "sgd"

  void validate() const;
};

/// One stored learning step: the agent's previous policy input and action,
/// the reward realized at its next selection, and the next policy input.
/// Observations are stored post-normalization (exactly as the networks saw
/// them).
struct Transition {
  Eigen::VectorXd obs;
  Eigen::Vector2d raw_action = Eigen::Vector2d::Zero();
  double logprob = 0.0;
  double reward = 0.0;
  // Unscaled reward for logging when `reward` has been rescaled.
  std::optional<double> raw_reward;
  Eigen::VectorXd next_obs;
  int episode = 0;
  // Discount of the agent when the step was taken. Traits are resampled each
  // episode, so one buffer can span several discounts.
  std::optional<double> gamma;
};

class RolloutBuffer {
 public:
  RolloutBuffer(AgentId agent_id, std::size_t capacity) : agent_id_(agent_id), capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("rollout capacity must be >= 1");
  }

  void push(Transition t) { transitions_.push_back(std::move(t)); }
  bool full() const { return transitions_.size() >= capacity_; }
  void clear() { transitions_.clear(); }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  std::size_t capacity() const { return capacity_; }
  AgentId agent_id() const { return agent_id_; }
  const std::vector<Transition>& transitions() const { return transitions_; }

 private:
  AgentId agent_id_;
  std::size_t capacity_;
  std::vector<Transition> transitions_;
};

struct Advantages {
  Eigen::VectorXd raw;         // GAE before normalization
  Eigen::VectorXd normalized;  // zero mean, unit std within the buffer
  Eigen::VectorXd returns;     // raw + V(obs)
  Eigen::VectorXd values;      // V(obs)
};

/// Generalized advantage estimation with the agent's own discount factor.
/// The recursion restarts where consecutive transitions come from different
/// episodes; each segment bootstraps from V(next_obs). A transition's own
/// `gamma`, when set, overrides the `gamma` argument.
Advantages compute_advantages(const RolloutBuffer& buffer, const PolicyParams& params,
                              double gamma, double gae_lambda);

struct ActorBatch {
  Eigen::MatrixXd obs;          // 11 x B
  Eigen::MatrixXd raw_actions;  // 2 x B
  Eigen::VectorXd old_logprob;
  Eigen::VectorXd advantages;
};

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped surrogate minus entropy bonus; gradient w.r.t. actor_vector().
LossAndGradient actor_loss(const PolicyParams& params, const ActorBatch& batch,
                           double clip_epsilon, double entropy_coef);

/// Mean squared error to the return targets; gradient w.r.t. critic_vector().
LossAndGradient critic_loss(const PolicyParams& params, const Eigen::MatrixXd& obs,
                            const Eigen::VectorXd& returns);

/// Entropy of the pre-squash Gaussian.
double gaussian_entropy(const Eigen::VectorXd& log_std);

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  AdamOptimizer(std::size_t size, double lr);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  Eigen::VectorXd m_, v_;
  double lr_ = 0.0;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

/// Running mean/variance normalizer for policy inputs; frozen at evaluation.
class ObservationNormalizer {
 public:
  ObservationNormalizer();

  void update(const Observation& obs);
  Eigen::VectorXd normalize(const Observation& obs) const;

  double count() const { return count_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& var() const { return var_; }
  void set_state(double count, const Eigen::VectorXd& mean, const Eigen::VectorXd& var);

  static constexpr double kClip = 10.0;

 private:
  double count_ = 0.0;
  Eigen::VectorXd mean_;
  Eigen::VectorXd var_;
};

/// Divides rewards by the running standard deviation of each agent's
/// discounted return, so value targets stay O(1) whatever the penalty scale.
/// Rewards are not shifted: the sign of every term is preserved.
class RewardScaler {
 public:
  explicit RewardScaler(std::size_t agents);

  double scale(std::size_t agent, double reward, double gamma);
  void reset_returns();
  double std() const;

 private:
  std::vector<double> returns_;
  double count_ = 0.0;
  double mean_ = 0.0;
  double var_ = 0.0;
};

struct UpdateStats {
  double mean_reward = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// Owns the optimizer state of the shared actor-critic.
class PpoLearner {
 public:
  PpoLearner(PolicyParams& params, const PPOConfig& config);

  /// Consumes one agent's full buffer: several epochs of minibatch updates of
  /// the clipped surrogate and the value loss, then clears the buffer.
  UpdateStats update(RolloutBuffer& buffer, double gamma, std::mt19937_64& rng);

  const PPOConfig& config() const { return config_; }

 private:
  void apply(Eigen::VectorXd& params, Eigen::VectorXd grad, AdamOptimizer& opt, double lr);

  PolicyParams& params_;
  PPOConfig config_;
  AdamOptimizer actor_opt_;
  AdamOptimizer critic_opt_;
};

}  // namespace hetmarket
