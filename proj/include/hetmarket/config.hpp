#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetmarket/agent.hpp"
#include "hetmarket/baselines.hpp"
#include "hetmarket/ppo.hpp"

namespace hetmarket {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MarketConfig {
  int n_agents = 0;           // required
  Step steps = 0;             // T_sim, required
  double tick_size = 0.1;
  double initial_price = 100.0;
  double fundamental_volatility = 3e-4;
  Step order_lifetime = 1000;  // kNoExpiry disables expiry
  int seed_orders_per_side = 20;
  std::int64_t seed_order_max_volume = 5;
  double seed_price_range = 0.01;  // relative half-width of the seeded book
};

struct AgentConfig {
  TraitPriors priors;
  RewardConfig reward;
};

struct LearningConfig {
  PPOConfig ppo;
  int hidden_width = 64;
  int rollout_length = 64;
  int max_episodes = 10;
  int max_updates = 0;           // 0: no cap
  int plateau_window = 0;        // 0: detector disabled
  double plateau_tolerance = 0.01;
  bool normalize_observations = true;
  bool normalize_rewards = true;
};

struct PopulationConfig {
  std::string agent_type = "ours";  // ours | zi | fcn | adfcn
  double zi_spread_scale = 0.005;
  FcnPriors fcn;
};

struct EvaluationConfig {
  int steps_per_bar = 20;
  int bars_per_series = 200;
  std::vector<int> acorr_lags;  // empty means 1..70
  double tail_fraction = 0.05;
  double tail_band_low = 2.8;
  double tail_band_high = 3.2;
  double weight_return = 1.0;
  double weight_tail = 1.0;
  double weight_acorr = 1.0;
  int max_cloud_points = 1000;
  bool descending_tail_indexing = false;

  std::vector<int> lags() const;
};

struct CalibrationConfig {
  std::vector<double> sigma_std;
  std::vector<double> alpha_std;
  std::vector<double> gamma_min;
  int trials = 1;
  int simulation_episodes = 1;
  int threads = 0;  // 0: hardware concurrency
};

struct ExperimentConfig {
  MarketConfig market;
  AgentConfig agent;
  LearningConfig learning;
  PopulationConfig population;
  EvaluationConfig evaluation;
  CalibrationConfig calibration;
  std::uint64_t seed = 1;

  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);
/// FNV-1a hash of the canonical JSON serialization.
std::uint64_t config_hash(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace hetmarket
