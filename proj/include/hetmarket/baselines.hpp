#pragma once

#include <deque>
#include <random>
#include <span>

#include "hetmarket/agent.hpp"

namespace hetmarket {

/// Zero-intelligence order: one unit, random side, log-normal price jitter
/// around the mid.
DecodedOrder zi_order(std::mt19937_64& rng, double mid, double spread_scale);

/// Fundamental / chartist / noise trader parameters for one agent.
struct FcnParams {
  double fundamental_weight = 1.0;
  double chartist_weight = 1.0;
  double noise_weight = 1.0;
  int horizon = 100;           // tau_h, steps
  double noise_scale = 1e-3;   // std of the noise forecast component
  double risk_aversion = 1.0;
  std::int64_t max_volume = 5;

  void validate() const;
};

/// Heterogeneity priors: weights are log-normal, horizons uniform.
struct FcnPriors {
  double fundamental_log_mean = 0.0;
  double chartist_log_mean = 0.0;
  double noise_log_mean = 0.0;
  double weight_log_std = 0.5;
  int horizon_min = 50;
  int horizon_max = 150;
  double noise_scale = 1e-3;
  double risk_aversion_min = 0.5;
  double risk_aversion_max = 2.0;
  std::int64_t max_volume = 5;
  int adaptive_window = 50;

  void validate() const;
};

FcnParams sample_fcn_params(const FcnPriors& priors, std::mt19937_64& rng);

/// Market quantities consulted by the heuristic traders.
struct FcnView {
  std::span<const double> mid_prices;  // indexed by step; back() is the current mid
  double fundamental = 0.0;
};

struct FcnForecast {
  double expected_return = 0.0;  // per-step log return
  double forecast_price = 0.0;
};

/// Weighted-average expected log return and the implied forecast price.
FcnForecast fcn_forecast(const FcnParams& params, const FcnView& view, double noise);

/// Order drawn between the mid and the forecast price. Buys when the forecast
/// is above the mid, sells when below; no order when they coincide.
DecodedOrder fcn_order(const FcnParams& params, const FcnView& view, std::mt19937_64& rng);

/// Forecast accuracy bookkeeping for the adaptive FCN trader.
struct AdaptiveState {
  explicit AdaptiveState(int window = 50);

  int window;
  std::deque<double> fundamental_errors;
  std::deque<double> chartist_errors;
  // Forecasts issued at the agent's previous order, scored at the next one.
  bool has_pending = false;
  Step pending_step = 0;
  double pending_fundamental = 0.0;  // predicted per-step log return
  double pending_chartist = 0.0;

  enum class Strategy { Mixed, Fundamental, Chartist };
  Strategy last_choice = Strategy::Mixed;

  double mean_error(const std::deque<double>& errors) const;
  /// Winner-take-all once both error windows are full; ties favour the
  /// fundamental strategy. Mixed before that.
  Strategy select() const;
  void record(double fundamental_error_sq, double chartist_error_sq);
};

/// Scores the previous forecasts against the realized mean return, updates
/// the error windows, then places an order with the selected strategy.
DecodedOrder adfcn_update_and_order(const FcnParams& params, AdaptiveState& state,
                                    const FcnView& view, Step now, std::mt19937_64& rng);

}  // namespace hetmarket
