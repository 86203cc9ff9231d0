#include "hetmarket/network.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hetmarket {

Mlp::Mlp(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] < 1 || sizes[i + 1] < 1) throw std::invalid_argument("layer sizes must be >= 1");
    layers_.push_back({Eigen::MatrixXd::Zero(sizes[i + 1], sizes[i]),
                       Eigen::VectorXd::Zero(sizes[i + 1])});
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Cache* cache) const {
  Eigen::MatrixXd x = input;
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(x);
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * x;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.array().tanh().matrix();
    x = std::move(z);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_output,
                              Eigen::MatrixXd* grad_input) const {
  Eigen::VectorXd grad(parameter_count());
  // Offsets of each layer's block in the flattened vector.
  std::vector<std::size_t> offsets(layers_.size());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offsets[l] = offset;
    offset += layers_[l].weight.size() + layers_[l].bias.size();
  }

  Eigen::MatrixXd delta = grad_output;  // gradient w.r.t. pre-activation of the current layer
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[l];
    const Eigen::MatrixXd gw = delta * input.transpose();
    const Eigen::VectorXd gb = delta.rowwise().sum();
    Eigen::Map<Eigen::MatrixXd>(grad.data() + offsets[l], gw.rows(), gw.cols()) = gw;
    grad.segment(offsets[l] + gw.size(), gb.size()) = gb;

    Eigen::MatrixXd grad_in = layers_[l].weight.transpose() * delta;
    if (l > 0) {
      // input is tanh output of the previous layer
      delta = grad_in.array() * (1.0 - input.array().square());
    } else if (grad_input) {
      *grad_input = std::move(grad_in);
    }
  }
  return grad;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

void Mlp::write_parameters(double* dst) const {
  for (const auto& layer : layers_) {
    Eigen::Map<Eigen::MatrixXd>(dst, layer.weight.rows(), layer.weight.cols()) = layer.weight;
    dst += layer.weight.size();
    Eigen::Map<Eigen::VectorXd>(dst, layer.bias.size()) = layer.bias;
    dst += layer.bias.size();
  }
}

void Mlp::read_parameters(const double* src) {
  for (auto& layer : layers_) {
    layer.weight = Eigen::Map<const Eigen::MatrixXd>(src, layer.weight.rows(), layer.weight.cols());
    src += layer.weight.size();
    layer.bias = Eigen::Map<const Eigen::VectorXd>(src, layer.bias.size());
    src += layer.bias.size();
  }
}

Eigen::MatrixXd orthogonal_matrix(int rows, int cols, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int tall = std::max(rows, cols);
  const int narrow = std::min(rows, cols);
  Eigen::MatrixXd a(tall, narrow);
  for (int j = 0; j < narrow; ++j)
    for (int i = 0; i < tall; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, narrow);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(narrow, narrow);
  for (int j = 0; j < narrow; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  if (rows < cols) return gain * q.transpose();
  return gain * q;
}

Eigen::VectorXd PolicyParams::actor_vector() const {
  Eigen::VectorXd v(actor_parameter_count());
  actor.write_parameters(v.data());
  v.tail(log_std.size()) = log_std;
  return v;
}

Eigen::VectorXd PolicyParams::critic_vector() const {
  Eigen::VectorXd v(critic_parameter_count());
  critic.write_parameters(v.data());
  return v;
}

void PolicyParams::set_actor_vector(const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != actor_parameter_count())
    throw std::invalid_argument("actor parameter vector has wrong size");
  actor.read_parameters(v.data());
  log_std = v.tail(log_std.size());
}

void PolicyParams::set_critic_vector(const Eigen::VectorXd& v) {
  if (static_cast<std::size_t>(v.size()) != critic_parameter_count())
    throw std::invalid_argument("critic parameter vector has wrong size");
  critic.read_parameters(v.data());
}

PolicyParams zero_params(int hidden_width) {
  if (hidden_width < 1) throw std::invalid_argument("hidden width must be >= 1");
  const int obs = static_cast<int>(kObservationSize);
  PolicyParams p;
  p.hidden_width = hidden_width;
  p.actor = Mlp({obs, hidden_width, hidden_width, kActionSize});
  p.critic = Mlp({obs, hidden_width, hidden_width, 1});
  p.log_std = Eigen::VectorXd::Zero(kActionSize);
  return p;
}

PolicyParams init_params(int hidden_width, std::uint64_t seed, InitGains gains) {
  PolicyParams p = zero_params(hidden_width);
  std::mt19937_64 rng(seed);
  auto init = [&](Mlp& net, double head_gain) {
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const double gain = l + 1 < layers.size() ? gains.hidden : head_gain;
      layers[l].weight = orthogonal_matrix(static_cast<int>(layers[l].weight.rows()),
                                           static_cast<int>(layers[l].weight.cols()), gain, rng);
      layers[l].bias.setZero();
    }
  };
  init(p.actor, gains.policy_head);
  init(p.critic, gains.value_head);
  return p;
}

PolicyOutput policy_forward(const PolicyParams& params, const Eigen::VectorXd& obs) {
  const Eigen::MatrixXd out = params.actor.forward(obs);
  PolicyOutput result;
  result.mean = out.col(0);
  for (int k = 0; k < kActionSize; ++k)
    result.std[k] = std::exp(std::clamp(params.log_std[k], kLogStdMin, kLogStdMax));
  return result;
}

double value_forward(const PolicyParams& params, const Eigen::VectorXd& obs) {
  return params.critic.forward(obs)(0, 0);
}

Eigen::MatrixXd hidden_activations(const PolicyParams& params, const Eigen::MatrixXd& obs_rows,
                                   int layer) {
  if (layer != 1 && layer != 2) throw std::invalid_argument("hidden layer must be 1 or 2");
  Mlp::Cache cache;
  params.actor.forward(obs_rows.transpose(), &cache);
  return cache.activations[static_cast<std::size_t>(layer)].transpose();
}

double log_one_minus_tanh_sq(double x) {
  // 1 - tanh(x)^2 = 4 e^{-2|x|} / (1 + e^{-2|x|})^2
  const double a = std::abs(x);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

double squashed_logprob(const Eigen::Vector2d& raw, const Eigen::Vector2d& mean,
                        const Eigen::Vector2d& std) {
  constexpr double half_log_2pi = 0.91893853320467274178;
  double lp = 0.0;
  for (int k = 0; k < kActionSize; ++k) {
    const double z = (raw[k] - mean[k]) / std[k];
    lp += -0.5 * z * z - std::log(std[k]) - half_log_2pi - log_one_minus_tanh_sq(raw[k]);
  }
  return lp;
}

SampledAction sample_action(const Eigen::Vector2d& mean, const Eigen::Vector2d& std,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledAction s;
  for (int k = 0; k < kActionSize; ++k) {
    if (!(std[k] > 0.0)) throw std::invalid_argument("policy std must be positive");
    s.raw[k] = mean[k] + std[k] * normal(rng);
  }
  s.action.scaled_volume = std::tanh(s.raw[0]);
  s.action.scaled_margin = std::tanh(s.raw[1]);
  s.logprob = squashed_logprob(s.raw, mean, std);
  return s;
}

}  // namespace hetmarket
