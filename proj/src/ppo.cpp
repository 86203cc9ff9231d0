#include "hetmarket/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hetmarket {

void PPOConfig::validate() const {
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
    throw std::invalid_argument("clip epsilon must lie in (0, 1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
    throw std::invalid_argument("gae lambda must lie in [0, 1]");
  if (epochs < 1 || minibatch < 1) throw std::invalid_argument("epochs and minibatch must be >= 1");
  if (entropy_coef < 0.0 || grad_clip < 0.0)
    throw std::invalid_argument("entropy coefficient and gradient clip must be >= 0");
  if (optimizer != "adam" && optimizer != "sgd")
    throw std::invalid_argument("optimizer must be 'adam' or 'sgd'");
}

namespace {

Eigen::MatrixXd stack_columns(const std::vector<Transition>& ts, bool next) {
  const auto n = static_cast<Eigen::Index>(ts.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(kObservationSize), n);
  for (Eigen::Index i = 0; i < n; ++i) m.col(i) = next ? ts[i].next_obs : ts[i].obs;
  return m;
}

}  // namespace

Advantages compute_advantages(const RolloutBuffer& buffer, const PolicyParams& params,
                              double gamma, double gae_lambda) {
  if (buffer.empty()) throw std::invalid_argument("cannot compute advantages of an empty buffer");
  const auto& ts = buffer.transitions();
  const auto n = static_cast<Eigen::Index>(ts.size());
  const Eigen::VectorXd values = params.critic.forward(stack_columns(ts, false)).row(0).transpose();
  const Eigen::VectorXd next_values =
      params.critic.forward(stack_columns(ts, true)).row(0).transpose();

  Advantages out;
  out.values = values;
  out.raw.resize(n);
  double running = 0.0;
  for (Eigen::Index i = n; i-- > 0;) {
    const bool continues = i + 1 < n && ts[i + 1].episode == ts[i].episode;
    if (!continues) running = 0.0;
    const double g = ts[i].gamma.value_or(gamma);
    const double delta = ts[i].reward + g * next_values[i] - values[i];
    running = delta + g * gae_lambda * running;
    out.raw[i] = running;
  }
  out.returns = out.raw + values;
  const double mean = out.raw.mean();
  const double var = (out.raw.array() - mean).square().mean();
  const double std = std::sqrt(var);
  out.normalized = out.raw.array() - mean;
  if (std > 1e-12) out.normalized /= std;
  return out;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  constexpr double half_log_2pi_e = 1.41893853320467274178;
  double h = 0.0;
  for (Eigen::Index k = 0; k < log_std.size(); ++k)
    h += std::clamp(log_std[k], kLogStdMin, kLogStdMax) + half_log_2pi_e;
  return h;
}

LossAndGradient actor_loss(const PolicyParams& params, const ActorBatch& batch,
                           double clip_epsilon, double entropy_coef) {
  const Eigen::Index b = batch.obs.cols();
  Mlp::Cache cache;
  const Eigen::MatrixXd means = params.actor.forward(batch.obs, &cache);

  Eigen::Vector2d log_std, std, log_std_mask;
  for (int k = 0; k < kActionSize; ++k) {
    const double s = params.log_std[k];
    log_std[k] = std::clamp(s, kLogStdMin, kLogStdMax);
    log_std_mask[k] = (s > kLogStdMin && s < kLogStdMax) ? 1.0 : 0.0;
    std[k] = std::exp(log_std[k]);
  }

  Eigen::MatrixXd grad_mean = Eigen::MatrixXd::Zero(kActionSize, b);
  Eigen::Vector2d grad_log_std = Eigen::Vector2d::Zero();
  double surrogate = 0.0;
  int clipped = 0;
  const double inv_b = 1.0 / static_cast<double>(b);

  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::Vector2d raw = batch.raw_actions.col(i);
    const Eigen::Vector2d mean = means.col(i);
    const double logp = squashed_logprob(raw, mean, std);
    const double ratio = std::exp(logp - batch.old_logprob[i]);
    const double adv = batch.advantages[i];
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    const double unclipped_obj = ratio * adv;
    const double clipped_obj = clipped_ratio * adv;
    if (unclipped_obj <= clipped_obj) {
      surrogate += unclipped_obj;
      // d(-ratio * adv)/d logp = -ratio * adv
      const double g = -ratio * adv * inv_b;
      for (int k = 0; k < kActionSize; ++k) {
        const double z = (raw[k] - mean[k]) / std[k];
        grad_mean(k, i) = g * z / std[k];
        grad_log_std[k] += g * (z * z - 1.0);
      }
    } else {
      surrogate += clipped_obj;
      ++clipped;
    }
  }

  LossAndGradient out;
  out.entropy = gaussian_entropy(params.log_std);
  out.loss = -surrogate * inv_b - entropy_coef * out.entropy;
  out.clip_fraction = static_cast<double>(clipped) * inv_b;
  out.gradient.resize(static_cast<Eigen::Index>(params.actor_parameter_count()));
  const Eigen::VectorXd g_net = params.actor.backward(cache, grad_mean);
  out.gradient.head(g_net.size()) = g_net;
  for (int k = 0; k < kActionSize; ++k)
    out.gradient[g_net.size() + k] = (grad_log_std[k] - entropy_coef) * log_std_mask[k];
  return out;
}

LossAndGradient critic_loss(const PolicyParams& params, const Eigen::MatrixXd& obs,
                            const Eigen::VectorXd& returns) {
  Mlp::Cache cache;
  const Eigen::MatrixXd values = params.critic.forward(obs, &cache);
  const Eigen::RowVectorXd err = values.row(0) - returns.transpose();
  const double inv_b = 1.0 / static_cast<double>(obs.cols());
  LossAndGradient out;
  out.loss = err.squaredNorm() * inv_b;
  out.gradient = params.critic.backward(cache, 2.0 * inv_b * err);
  return out;
}

AdamOptimizer::AdamOptimizer(std::size_t size, double lr)
    : m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
      lr_(lr) {}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

ObservationNormalizer::ObservationNormalizer()
    : mean_(Eigen::VectorXd::Zero(kObservationSize)),
      var_(Eigen::VectorXd::Ones(kObservationSize)) {}

void ObservationNormalizer::update(const Observation& obs) {
  // Welford update with a population variance estimate.
  const Eigen::Map<const Eigen::VectorXd> x(obs.data(), kObservationSize);
  count_ += 1.0;
  if (count_ == 1.0) {
    mean_ = x;
    var_.setZero();
    return;
  }
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / count_;
  var_ += (delta.cwiseProduct(x - mean_) - var_) / count_;
}

Eigen::VectorXd ObservationNormalizer::normalize(const Observation& obs) const {
  const Eigen::Map<const Eigen::VectorXd> x(obs.data(), kObservationSize);
  Eigen::VectorXd out(kObservationSize);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double denom = std::sqrt(var_[i] + 1e-8);
    out[i] = std::clamp((x[i] - mean_[i]) / denom, -kClip, kClip);
  }
  return out;
}

void ObservationNormalizer::set_state(double count, const Eigen::VectorXd& mean,
                                      const Eigen::VectorXd& var) {
  if (mean.size() != static_cast<Eigen::Index>(kObservationSize) || var.size() != mean.size())
    throw std::invalid_argument("normalizer state has wrong dimension");
  count_ = count;
  mean_ = mean;
  var_ = var;
}

RewardScaler::RewardScaler(std::size_t agents) : returns_(agents, 0.0) {}

double RewardScaler::scale(std::size_t agent, double reward, double gamma) {
  double& g = returns_.at(agent);
  g = gamma * g + reward;
  count_ += 1.0;
  const double delta = g - mean_;
  mean_ += delta / count_;
  var_ += (delta * (g - mean_) - var_) / count_;
  return reward / std();
}

void RewardScaler::reset_returns() { std::fill(returns_.begin(), returns_.end(), 0.0); }

double RewardScaler::std() const { return count_ < 2.0 ? 1.0 : std::sqrt(var_ + 1e-8); }

PpoLearner::PpoLearner(PolicyParams& params, const PPOConfig& config)
    : params_(params),
      config_(config),
      actor_opt_(params.actor_parameter_count(), config.actor_lr),
      critic_opt_(params.critic_parameter_count(), config.critic_lr) {
  config_.validate();
}

void PpoLearner::apply(Eigen::VectorXd& params, Eigen::VectorXd grad, AdamOptimizer& opt,
                       double lr) {
  if (config_.grad_clip > 0.0) {
    const double norm = grad.norm();
    if (norm > config_.grad_clip) grad *= config_.grad_clip / norm;
  }
  if (config_.optimizer == "sgd")
    params -= lr * grad;
  else
    opt.step(params, grad);
}

UpdateStats PpoLearner::update(RolloutBuffer& buffer, double gamma, std::mt19937_64& rng) {
  const auto& ts = buffer.transitions();
  const auto n = static_cast<Eigen::Index>(ts.size());
  const Advantages adv = compute_advantages(buffer, params_, gamma, config_.gae_lambda);

  Eigen::MatrixXd obs(static_cast<Eigen::Index>(kObservationSize), n);
  Eigen::MatrixXd raw(kActionSize, n);
  Eigen::VectorXd old_logprob(n);
  double reward_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    obs.col(i) = ts[i].obs;
    raw.col(i) = ts[i].raw_action;
    old_logprob[i] = ts[i].logprob;
    reward_sum += ts[i].raw_reward.value_or(ts[i].reward);
  }

  UpdateStats stats;
  stats.mean_reward = reward_sum / static_cast<double>(n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index mb = std::min<Eigen::Index>(config_.minibatch, n);
  int batches = 0;

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += mb) {
      const Eigen::Index len = std::min(mb, n - start);
      ActorBatch batch;
      batch.obs.resize(obs.rows(), len);
      batch.raw_actions.resize(kActionSize, len);
      batch.old_logprob.resize(len);
      batch.advantages.resize(len);
      Eigen::VectorXd returns(len);
      for (Eigen::Index j = 0; j < len; ++j) {
        const Eigen::Index idx = order[static_cast<std::size_t>(start + j)];
        batch.obs.col(j) = obs.col(idx);
        batch.raw_actions.col(j) = raw.col(idx);
        batch.old_logprob[j] = old_logprob[idx];
        batch.advantages[j] = adv.normalized[idx];
        returns[j] = adv.returns[idx];
      }

      const LossAndGradient a = actor_loss(params_, batch, config_.clip_epsilon,
                                           config_.entropy_coef);
      const LossAndGradient c = critic_loss(params_, batch.obs, returns);
      if (!std::isfinite(a.loss) || !std::isfinite(c.loss) || !a.gradient.allFinite() ||
          !c.gradient.allFinite()) {
        std::ostringstream msg;
        msg << "non-finite PPO loss for agent " << buffer.agent_id() << " (epoch " << epoch
            << ", actor_loss=" << a.loss << ", critic_loss=" << c.loss
            << ", mean_reward=" << stats.mean_reward << ")";
        throw NonFiniteLossError(msg.str());
      }

      Eigen::VectorXd actor_params = params_.actor_vector();
      apply(actor_params, a.gradient, actor_opt_, config_.actor_lr);
      params_.set_actor_vector(actor_params);
      Eigen::VectorXd critic_params = params_.critic_vector();
      apply(critic_params, c.gradient, critic_opt_, config_.critic_lr);
      params_.set_critic_vector(critic_params);

      stats.actor_loss += a.loss;
      stats.critic_loss += c.loss;
      stats.entropy += a.entropy;
      stats.clip_fraction += a.clip_fraction;
      ++batches;
    }
  }
  stats.actor_loss /= batches;
  stats.critic_loss /= batches;
  stats.entropy /= batches;
  stats.clip_fraction /= batches;
  buffer.clear();
  return stats;
}

}  // namespace hetmarket
