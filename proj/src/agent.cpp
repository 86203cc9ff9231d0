#include "hetmarket/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hetmarket {

void TraitPriors::validate() const {
  if (sigma_std < 0.0 || alpha_std < 0.0)
    throw std::invalid_argument("trait prior standard deviations must be >= 0");
  if (!(gamma_min >= 0.0 && gamma_min <= gamma_max && gamma_max < 1.0))
    throw std::invalid_argument("discount prior requires 0 <= gamma_min <= gamma_max < 1");
  if (!(position_mean > 0.0) || !(cash_mean > 0.0))
    throw std::invalid_argument("initial position and cash means must be positive");
}

SampledAgent sample_agent(const TraitPriors& priors, std::mt19937_64& rng) {
  priors.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::exponential_distribution<double> position_dist(1.0 / priors.position_mean);
  std::exponential_distribution<double> cash_dist(1.0 / priors.cash_mean);

  SampledAgent agent;
  agent.traits.sigma = std::max(0.0, priors.sigma_mean + priors.sigma_std * normal(rng));
  agent.traits.alpha = priors.alpha_mean + priors.alpha_std * normal(rng);
  agent.traits.gamma =
      priors.gamma_min + (priors.gamma_max - priors.gamma_min) * uniform(rng);
  agent.state.position = std::llround(position_dist(rng));
  agent.state.cash = cash_dist(rng);
  return agent;
}

const std::array<const char*, kObservationSize>& observation_names() {
  static const std::array<const char*, kObservationSize> names = {
      "holding_asset_ratio", "asset_to_max_order_ratio", "inverted_buying_power",
      "return",              "volatility",               "asset_to_buy_depth",
      "asset_to_sell_depth", "blurred_fundamental_return", "uninformedness",
      "risk_aversion",       "discount_factor"};
  return names;
}

void RewardConfig::validate() const {
  if (short_penalty < 0 || cash_penalty < 0 || illiquidity_penalty < 0 || fundamental_penalty < 0)
    throw std::invalid_argument("penalty weights must be >= 0");
  if (utility_scale < 0 || imbalance_scale < 0 || buy_depth_decay < 0 || sell_depth_decay < 0)
    throw std::invalid_argument("scales and decay rates must be >= 0");
  if (!(depth_range > 0.0)) throw std::invalid_argument("depth range must be positive");
  if (max_volume < 1) throw std::invalid_argument("max order volume must be >= 1");
  if (!(max_margin > 0.0 && max_margin < 1.0))
    throw std::invalid_argument("max price margin must lie in (0, 1)");
  if (!(observation_cap > 0.0) || !(illiquidity_cap > 0.0))
    throw std::invalid_argument("caps must be positive");
}

namespace {

void check_interval(std::span<const double> prices, Step t_prev, Step t_now) {
  if (t_now <= t_prev) throw std::invalid_argument("return interval must have positive length");
  if (t_prev < 0 || static_cast<std::size_t>(t_now) >= prices.size())
    throw std::out_of_range("return interval outside the recorded price series");
}

}  // namespace

double log_return(std::span<const double> prices, Step t_prev, Step t_now) {
  check_interval(prices, t_prev, t_now);
  double sum = 0.0;
  for (Step t = t_prev + 1; t <= t_now; ++t) sum += std::log(prices[t] / prices[t - 1]);
  return sum / static_cast<double>(t_now - t_prev);
}

double realized_volatility(std::span<const double> prices, Step t_prev, Step t_now) {
  const double mean = log_return(prices, t_prev, t_now);
  double sum = 0.0;
  for (Step t = t_prev + 1; t <= t_now; ++t) {
    const double d = std::log(prices[t] / prices[t - 1]) - mean;
    sum += d * d;
  }
  return sum / static_cast<double>(t_now - t_prev);
}

double blurred_fundamental_return(double fundamental, double mid, double sigma,
                                  std::mt19937_64& rng) {
  const double exact = std::log(fundamental / mid);
  if (sigma <= 0.0) return exact;
  std::normal_distribution<double> noise(0.0, sigma);
  return exact + noise(rng);
}

double capped_ratio(double num, double den, double cap) {
  if (num == 0.0) return 0.0;
  if (den == 0.0) return num > 0 ? cap : -cap;
  return std::clamp(num / den, -cap, cap);
}

Observation build_observation(const AgentTraits& traits, const AgentState& state,
                              const MarketView& view, const RewardConfig& config,
                              std::mt19937_64& rng) {
  const double cap = config.observation_cap;
  const double w = static_cast<double>(state.position);
  const double wealth = state.cash + w * view.mid;

  Observation obs{};
  obs[kHoldingAssetRatio] = capped_ratio(w * view.mid, wealth, cap);
  obs[kAssetToMaxOrderRatio] = w / static_cast<double>(config.max_volume);
  obs[kInvertedBuyingPower] = capped_ratio(view.mid, state.cash, cap);
  obs[kReturn] = log_return(view.mid_prices, state.last_order_step, view.now);
  obs[kVolatility] = realized_volatility(view.mid_prices, state.last_order_step, view.now);
  obs[kAssetToBuyDepth] = capped_ratio(std::abs(w), view.buy_depth, cap);
  obs[kAssetToSellDepth] = capped_ratio(std::abs(w), view.sell_depth, cap);
  obs[kBlurredFundamentalReturn] =
      blurred_fundamental_return(view.fundamental, view.mid, traits.sigma, rng);
  obs[kUninformedness] = traits.sigma;
  obs[kRiskAversion] = traits.alpha;
  obs[kDiscountFactor] = traits.gamma;
  return obs;
}

DecodedOrder decode_action(const Action& action, double mid, const RewardConfig& config,
                           double tick_size) {
  const double v_tilde = std::clamp(action.scaled_volume, -1.0, 1.0);
  const double r_tilde = std::clamp(action.scaled_margin, -1.0, 1.0);
  DecodedOrder order;
  order.signed_volume =
      static_cast<std::int64_t>(std::ceil(static_cast<double>(config.max_volume) * v_tilde));
  const double sign = v_tilde > 0 ? 1.0 : (v_tilde < 0 ? -1.0 : 0.0);
  double price = mid - config.max_margin * sign * r_tilde * mid;
  if (tick_size > 0.0) price = std::max(1.0, std::round(price / tick_size)) * tick_size;
  order.price = price;
  return order;
}

double utility(double wealth, double ret, std::int64_t position, double mid, double volatility,
               double alpha, double utility_scale) {
  const double exposure = static_cast<double>(position) * mid;
  const double inner =
      utility_scale * (wealth + ret * exposure - 0.5 * alpha * volatility * std::abs(exposure));
  return 2.0 / std::numbers::pi * std::atan(inner);
}

double illiquidity(double buy_depth, double sell_depth, double imbalance_scale, double cap) {
  if (!(buy_depth > 0.0) || !(sell_depth > 0.0)) return cap;
  const double hi = std::max(buy_depth, sell_depth);
  const double lo = std::min(buy_depth, sell_depth);
  const double value = 1.0 / buy_depth + 1.0 / sell_depth + imbalance_scale * (hi / lo - 1.0);
  return std::min(value, cap);
}

double DeviationTracker::update(double fundamental, double mid, Step t) {
  const double d = std::log(fundamental / mid);
  const int sign = d > 0 ? 1 : (d < 0 ? -1 : 0);
  if (!started_ || sign != sign_ || sign == 0) {
    started_ = true;
    sign_ = sign;
    run_start_ = t - 1;
    run_.clear();
  }
  run_.push_back(std::abs(d));
  // run_[k] holds step run_start_ + 1 + k; its weight is 1 / (t + 1 - t').
  const std::size_t len = run_.size();
  double total = 0.0;
  for (std::size_t k = 0; k < len; ++k) total += run_[k] / static_cast<double>(len - k);
  value_ = total;
  return value_;
}

void DeviationTracker::reset() {
  sign_ = 0;
  started_ = false;
  run_start_ = 0;
  run_.clear();
  value_ = 0.0;
}

RewardBreakdown reward(const RewardInputs& in, const RewardConfig& config) {
  RewardBreakdown out;
  const double wealth = in.cash + static_cast<double>(in.position) * in.mid;
  out.utility = utility(wealth, in.ret, in.position, in.mid, in.volatility, in.alpha,
                        config.utility_scale);
  out.short_term = in.position < 0 ? config.short_penalty : 0.0;
  out.cash_term = in.cash < 0 ? config.cash_penalty : 0.0;
  out.illiquidity = illiquidity(in.buy_depth, in.sell_depth, config.imbalance_scale,
                                config.illiquidity_cap);
  out.fundamental_deviation = in.fundamental_deviation;
  out.total = out.utility - out.short_term - out.cash_term -
              config.illiquidity_penalty * out.illiquidity -
              config.fundamental_penalty * out.fundamental_deviation;
  return out;
}

void settle_trades(std::span<AgentState> states, std::span<const Trade> trades) {
  for (const auto& trade : trades) {
    const double notional = trade.price * static_cast<double>(trade.volume);
    AgentState& buyer = states[static_cast<std::size_t>(trade.buyer_id - 1)];
    AgentState& seller = states[static_cast<std::size_t>(trade.seller_id - 1)];
    buyer.cash -= notional;
    buyer.position += trade.volume;
    seller.cash += notional;
    seller.position -= trade.volume;
  }
}

}  // namespace hetmarket
