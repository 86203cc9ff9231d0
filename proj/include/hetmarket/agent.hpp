#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hetmarket/order_book.hpp"

namespace hetmarket {

/// Population-level trait distribution. Uninformedness and risk aversion are
/// Gaussian, the discount factor is uniform, and initial holdings are
/// exponential with the given means.
struct TraitPriors {
  double sigma_mean = 0.01;
  double sigma_std = 0.005;
  double alpha_mean = 5.0;
  double alpha_std = 2.0;
  double gamma_min = 0.8;
  double gamma_max = 0.99;
  double position_mean = 10.0;
  double cash_mean = 2000.0;

  void validate() const;
  double gamma_mean() const { return 0.5 * (gamma_min + gamma_max); }
};

struct AgentTraits {
  double sigma = 0.0;  // uninformedness
  double alpha = 0.0;  // risk aversion
  double gamma = 0.0;  // discount factor
};

struct AgentState {
  std::int64_t position = 0;
  double cash = 0.0;
  Step last_order_step = 0;
  int order_count = 0;
};

struct SampledAgent {
  AgentTraits traits;
  AgentState state;
};

SampledAgent sample_agent(const TraitPriors& priors, std::mt19937_64& rng);

inline constexpr std::size_t kObservationSize = 11;

/// Fixed component order of the policy input.
enum ObservationIndex : std::size_t {
  kHoldingAssetRatio = 0,
  kAssetToMaxOrderRatio,
  kInvertedBuyingPower,
  kReturn,
  kVolatility,
  kAssetToBuyDepth,
  kAssetToSellDepth,
  kBlurredFundamentalReturn,
  kUninformedness,
  kRiskAversion,
  kDiscountFactor,
};

using Observation = std::array<double, kObservationSize>;

const std::array<const char*, kObservationSize>& observation_names();

struct Action {
  double scaled_volume = 0.0;
  double scaled_margin = 0.0;
};

struct RewardConfig {
  double short_penalty = 0.5;        // beta_short
  double cash_penalty = 0.5;         // beta_cash
  double illiquidity_penalty = 0.01; // beta_illiquidity
  double fundamental_penalty = 10.0; // beta_fundamental
  double utility_scale = 1e-3;       // omega_u
  double imbalance_scale = 0.1;      // omega_l
  double buy_depth_decay = 10.0;     // omega_b
  double sell_depth_decay = 10.0;    // omega_s
  double depth_range = 0.05;         // xi
  std::int64_t max_volume = 5;       // v_max
  double max_margin = 0.02;          // r_max
  double observation_cap = 1e6;
  double illiquidity_cap = 1e4;

  void validate() const;
};

/// Mean per-step log return of `prices` over (t_prev, t_now]. `prices[t]` is
/// the mid price recorded at step t.
double log_return(std::span<const double> prices, Step t_prev, Step t_now);

/// Mean squared deviation of per-step log returns over (t_prev, t_now] from
/// their mean.
double realized_volatility(std::span<const double> prices, Step t_prev, Step t_now);

double blurred_fundamental_return(double fundamental, double mid, double sigma,
                                  std::mt19937_64& rng);

/// num/den clamped to [-cap, cap]; 0 when num is 0, +-cap when den is 0.
double capped_ratio(double num, double den, double cap);

/// Market quantities an agent sees when it is selected.
struct MarketView {
  std::span<const double> mid_prices;  // indexed by step
  Step now = 0;
  double mid = 0.0;
  double fundamental = 0.0;
  double buy_depth = 0.0;   // b^xi
  double sell_depth = 0.0;  // s^xi
};

Observation build_observation(const AgentTraits& traits, const AgentState& state,
                              const MarketView& view, const RewardConfig& config,
                              std::mt19937_64& rng);

struct DecodedOrder {
  std::int64_t signed_volume = 0;  // 0 means no order
  double price = 0.0;
};

/// Maps a squashed action to an order. `tick_size` <= 0 disables rounding.
DecodedOrder decode_action(const Action& action, double mid, const RewardConfig& config,
                           double tick_size = 0.0);

/// Arctan-compressed CARA utility in (-1, 1).
double utility(double wealth, double ret, std::int64_t position, double mid, double volatility,
               double alpha, double utility_scale);

/// Depth-reciprocal plus imbalance penalty; `cap` when either side is empty.
double illiquidity(double buy_depth, double sell_depth, double imbalance_scale, double cap);

/// Integrated same-sign deviation of the mid price from the fundamental.
class DeviationTracker {
 public:
  double update(double fundamental, double mid, Step t);

  int current_sign() const { return sign_; }
  Step run_start() const { return run_start_; }
  double value() const { return value_; }
  void reset();

 private:
  int sign_ = 0;
  bool started_ = false;
  Step run_start_ = 0;
  std::vector<double> run_;  // |log(p_f / p_mid)| for steps in the current run
  double value_ = 0.0;
};

struct RewardBreakdown {
  double utility = 0.0;
  double short_term = 0.0;
  double cash_term = 0.0;
  double illiquidity = 0.0;
  double fundamental_deviation = 0.0;
  double total = 0.0;
};

struct RewardInputs {
  std::int64_t position = 0;
  double cash = 0.0;
  double mid = 0.0;
  double ret = 0.0;
  double volatility = 0.0;
  double alpha = 0.0;
  double buy_depth = 0.0;
  double sell_depth = 0.0;
  double fundamental_deviation = 0.0;  // R^f
};

RewardBreakdown reward(const RewardInputs& in, const RewardConfig& config);

/// Applies cash and position changes of `trades`. `states[id - 1]` belongs to
/// agent `id`.
void settle_trades(std::span<AgentState> states, std::span<const Trade> trades);

}  // namespace hetmarket
