#include "hetmarket/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hetmarket {

DecodedOrder zi_order(std::mt19937_64& rng, double mid, double spread_scale) {
  if (!(mid > 0.0)) throw std::invalid_argument("mid price must be positive");
  std::bernoulli_distribution buy(0.5);
  DecodedOrder order;
  order.signed_volume = buy(rng) ? 1 : -1;
  double eps = 0.0;
  if (spread_scale > 0.0) eps = std::normal_distribution<double>(0.0, spread_scale)(rng);
  order.price = mid * std::exp(eps);
  return order;
}

void FcnParams::validate() const {
  if (fundamental_weight < 0 || chartist_weight < 0 || noise_weight < 0)
    throw std::invalid_argument("FCN weights must be >= 0");
  if (!(fundamental_weight + chartist_weight + noise_weight > 0.0))
    throw std::invalid_argument("FCN weights must not all be zero");
  if (horizon < 1) throw std::invalid_argument("FCN horizon must be >= 1");
  if (noise_scale < 0) throw std::invalid_argument("FCN noise scale must be >= 0");
  if (!(risk_aversion > 0.0)) throw std::invalid_argument("FCN risk aversion must be positive");
  if (max_volume < 1) throw std::invalid_argument("FCN max volume must be >= 1");
}

void FcnPriors::validate() const {
  if (weight_log_std < 0) throw std::invalid_argument("weight log-std must be >= 0");
  if (horizon_min < 1 || horizon_max < horizon_min)
    throw std::invalid_argument("horizon range must satisfy 1 <= min <= max");
  if (noise_scale < 0) throw std::invalid_argument("noise scale must be >= 0");
  if (!(risk_aversion_min > 0.0) || risk_aversion_max < risk_aversion_min)
    throw std::invalid_argument("risk aversion range must be positive and ordered");
  if (max_volume < 1) throw std::invalid_argument("max volume must be >= 1");
  if (adaptive_window < 1) throw std::invalid_argument("adaptive window must be >= 1");
}

FcnParams sample_fcn_params(const FcnPriors& priors, std::mt19937_64& rng) {
  priors.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> horizon(priors.horizon_min, priors.horizon_max);
  std::uniform_real_distribution<double> aversion(priors.risk_aversion_min,
                                                  priors.risk_aversion_max);
  FcnParams p;
  p.fundamental_weight = std::exp(priors.fundamental_log_mean + priors.weight_log_std * normal(rng));
  p.chartist_weight = std::exp(priors.chartist_log_mean + priors.weight_log_std * normal(rng));
  p.noise_weight = std::exp(priors.noise_log_mean + priors.weight_log_std * normal(rng));
  p.horizon = horizon(rng);
  p.noise_scale = priors.noise_scale;
  p.risk_aversion = aversion(rng);
  p.max_volume = priors.max_volume;
  return p;
}

namespace {

double current_mid(const FcnView& view) { return view.mid_prices.back(); }

double chartist_return(const FcnView& view, int horizon) {
  const std::size_t n = view.mid_prices.size();
  if (n <= static_cast<std::size_t>(horizon))
    throw std::invalid_argument("insufficient price history for the FCN horizon");
  return std::log(view.mid_prices[n - 1] / view.mid_prices[n - 1 - horizon]) /
         static_cast<double>(horizon);
}

double history_variance(const FcnView& view, int horizon) {
  const std::size_t n = view.mid_prices.size();
  double mean = chartist_return(view, horizon);
  double sum = 0.0;
  for (std::size_t t = n - horizon; t < n; ++t) {
    const double d = std::log(view.mid_prices[t] / view.mid_prices[t - 1]) - mean;
    sum += d * d;
  }
  return sum / horizon;
}

}  // namespace

FcnForecast fcn_forecast(const FcnParams& params, const FcnView& view, double noise) {
  params.validate();
  const double mid = current_mid(view);
  const double tau = static_cast<double>(params.horizon);
  const double fundamental = std::log(view.fundamental / mid) / tau;
  const double chartist = chartist_return(view, params.horizon);
  const double total = params.fundamental_weight + params.chartist_weight + params.noise_weight;
  FcnForecast f;
  f.expected_return = (params.fundamental_weight * fundamental +
                       params.chartist_weight * chartist + params.noise_weight * noise) /
                      total;
  f.forecast_price = mid * std::exp(f.expected_return * tau);
  return f;
}

DecodedOrder fcn_order(const FcnParams& params, const FcnView& view, std::mt19937_64& rng) {
  double noise = 0.0;
  if (params.noise_scale > 0.0 && params.noise_weight > 0.0)
    noise = std::normal_distribution<double>(0.0, params.noise_scale)(rng);
  const FcnForecast f = fcn_forecast(params, view, noise);
  const double mid = current_mid(view);
  DecodedOrder order;
  if (f.forecast_price == mid) return order;

  // CARA-style demand: expected log gain over horizon-scaled variance.
  const double gain = std::abs(std::log(f.forecast_price / mid));
  const double risk = params.risk_aversion *
                      std::max(history_variance(view, params.horizon) * params.horizon, 1e-6);
  const auto volume = std::clamp<std::int64_t>(
      static_cast<std::int64_t>(std::ceil(gain / risk)), 1, params.max_volume);

  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  order.price = mid + u * (f.forecast_price - mid);
  order.signed_volume = f.forecast_price > mid ? volume : -volume;
  return order;
}

AdaptiveState::AdaptiveState(int window_) : window(window_) {
  if (window < 1) throw std::invalid_argument("adaptive window must be >= 1");
}

double AdaptiveState::mean_error(const std::deque<double>& errors) const {
  if (errors.empty()) return 0.0;
  return std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
}

AdaptiveState::Strategy AdaptiveState::select() const {
  const auto full = static_cast<std::size_t>(window);
  if (fundamental_errors.size() < full || chartist_errors.size() < full) return Strategy::Mixed;
  return mean_error(chartist_errors) < mean_error(fundamental_errors) ? Strategy::Chartist
                                                                      : Strategy::Fundamental;
}

void AdaptiveState::record(double fundamental_error_sq, double chartist_error_sq) {
  fundamental_errors.push_back(fundamental_error_sq);
  chartist_errors.push_back(chartist_error_sq);
  while (fundamental_errors.size() > static_cast<std::size_t>(window))
    fundamental_errors.pop_front();
  while (chartist_errors.size() > static_cast<std::size_t>(window)) chartist_errors.pop_front();
}

DecodedOrder adfcn_update_and_order(const FcnParams& params, AdaptiveState& state,
                                    const FcnView& view, Step now, std::mt19937_64& rng) {
  const double mid = current_mid(view);
  const double chartist = chartist_return(view, params.horizon);
  if (state.has_pending && now > state.pending_step) {
    const std::size_t n = view.mid_prices.size();
    const Step elapsed = now - state.pending_step;
    if (static_cast<std::size_t>(elapsed) < n) {
      const double realized =
          std::log(mid / view.mid_prices[n - 1 - static_cast<std::size_t>(elapsed)]) /
          static_cast<double>(elapsed);
      const double ef = realized - state.pending_fundamental;
      const double ec = realized - state.pending_chartist;
      state.record(ef * ef, ec * ec);
    }
  }
  state.has_pending = true;
  state.pending_step = now;
  state.pending_fundamental = std::log(view.fundamental / mid) / params.horizon;
  state.pending_chartist = chartist;

  state.last_choice = state.select();
  FcnParams effective = params;
  const double strategy_weight = params.fundamental_weight + params.chartist_weight;
  if (state.last_choice == AdaptiveState::Strategy::Fundamental) {
    effective.fundamental_weight = strategy_weight;
    effective.chartist_weight = 0.0;
  } else if (state.last_choice == AdaptiveState::Strategy::Chartist) {
    effective.fundamental_weight = 0.0;
    effective.chartist_weight = strategy_weight;
  }
  return fcn_order(effective, view, rng);
}

}  // namespace hetmarket
