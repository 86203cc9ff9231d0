#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "hetmarket/agent.hpp"

namespace hetmarket {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Feed-forward network with tanh hidden layers and a linear output layer.
/// Inputs are stored column-wise: a batch is an (in x B) matrix.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& sizes);

  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input, hidden..., output
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Cache* cache = nullptr) const;
  /// Gradient of sum(grad_output .* output) w.r.t. parameters, flattened in
  /// parameter order. Returns the gradient w.r.t. the input via `grad_input`.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& grad_output,
                           Eigen::MatrixXd* grad_input = nullptr) const;

  std::size_t parameter_count() const;
  void write_parameters(double* dst) const;
  void read_parameters(const double* src);

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  int input_size() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_size() const { return static_cast<int>(layers_.back().weight.rows()); }

 private:
  std::vector<DenseLayer> layers_;
};

/// Orthogonal matrix (rows x cols) scaled by `gain`: W^T W = gain^2 I when
/// rows >= cols, W W^T = gain^2 I otherwise.
Eigen::MatrixXd orthogonal_matrix(int rows, int cols, double gain, std::mt19937_64& rng);

inline constexpr int kActionSize = 2;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 1.0;

/// Shared actor-critic parameters. The actor maps an observation to the means
/// of a tanh-squashed Gaussian with state-independent log standard deviation;
/// the critic maps it to a scalar value.
struct PolicyParams {
  Mlp actor;
  Eigen::VectorXd log_std;
  Mlp critic;
  int hidden_width = 0;

  std::size_t actor_parameter_count() const { return actor.parameter_count() + log_std.size(); }
  std::size_t critic_parameter_count() const { return critic.parameter_count(); }
  Eigen::VectorXd actor_vector() const;
  Eigen::VectorXd critic_vector() const;
  void set_actor_vector(const Eigen::VectorXd& v);
  void set_critic_vector(const Eigen::VectorXd& v);
};

struct InitGains {
  double hidden = 1.4142135623730951;
  double policy_head = 0.01;
  double value_head = 1.0;
};

PolicyParams init_params(int hidden_width, std::uint64_t seed, InitGains gains = {});
/// All weights and biases zero, log-std zero.
PolicyParams zero_params(int hidden_width);

struct PolicyOutput {
  Eigen::Vector2d mean;
  Eigen::Vector2d std;
};

PolicyOutput policy_forward(const PolicyParams& params, const Eigen::VectorXd& obs);
double value_forward(const PolicyParams& params, const Eigen::VectorXd& obs);

/// Post-activation values of hidden layer 1 or 2 of the actor for each row of
/// `obs_rows` (N x 11). Returns N x hidden_width.
Eigen::MatrixXd hidden_activations(const PolicyParams& params, const Eigen::MatrixXd& obs_rows,
                                   int layer);

struct SampledAction {
  Action action;              // tanh(raw)
  Eigen::Vector2d raw;        // pre-squash Gaussian draw
  double logprob = 0.0;       // log density of `action`
};

SampledAction sample_action(const Eigen::Vector2d& mean, const Eigen::Vector2d& std,
                            std::mt19937_64& rng);

/// log(1 - tanh(x)^2), evaluated without cancellation.
double log_one_minus_tanh_sq(double x);

/// Log density of the squashed action tanh(raw) under N(mean, std^2) per
/// component, including the change-of-variables term.
double squashed_logprob(const Eigen::Vector2d& raw, const Eigen::Vector2d& mean,
                        const Eigen::Vector2d& std);

}  // namespace hetmarket
