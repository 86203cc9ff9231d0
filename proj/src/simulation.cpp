#include "hetmarket/simulation.hpp"

#include <cmath>
#include <stdexcept>

namespace hetmarket {

std::string AblationSpec::label() const {
  if (!active()) return "none";
  const char* t = *trait == TraitKind::Sigma ? "sigma" : (*trait == TraitKind::Alpha ? "alpha" : "gamma");
  return std::string(mode == AblationMode::Homo ? "homo-" : "masked-") + t;
}

AblationSpec AblationSpec::parse(const std::string& trait, const std::string& mode) {
  AblationSpec spec;
  if (trait == "sigma")
    spec.trait = TraitKind::Sigma;
  else if (trait == "alpha")
    spec.trait = TraitKind::Alpha;
  else if (trait == "gamma")
    spec.trait = TraitKind::Gamma;
  else
    throw std::invalid_argument("ablation trait must be sigma, alpha or gamma, got '" + trait + "'");
  if (mode == "homo")
    spec.mode = AblationMode::Homo;
  else if (mode == "masked")
    spec.mode = AblationMode::Masked;
  else
    throw std::invalid_argument("ablation mode must be homo or masked, got '" + mode + "'");
  return spec;
}

TraitPriors apply_homo(const TraitPriors& priors, const AblationSpec& spec) {
  TraitPriors p = priors;
  if (!spec.homo()) return p;
  switch (*spec.trait) {
    case TraitKind::Sigma:
      p.sigma_std = 0.0;
      break;
    case TraitKind::Alpha:
      p.alpha_std = 0.0;
      break;
    case TraitKind::Gamma:
      p.gamma_min = p.gamma_max = priors.gamma_mean();
      break;
  }
  return p;
}

ObservationIndex trait_index(TraitKind trait) {
  switch (trait) {
    case TraitKind::Sigma:
      return kUninformedness;
    case TraitKind::Alpha:
      return kRiskAversion;
    case TraitKind::Gamma:
      break;
  }
  return kDiscountFactor;
}

double discounted_utility(double gamma, std::span<const double> utilities) {
  double total = 0.0, weight = 1.0;
  for (double u : utilities) {
    weight *= gamma;
    total += weight * u;
  }
  return total;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ stream) ^ index);
}

Simulation::Simulation(const ExperimentConfig& config, std::uint64_t seed, AblationSpec ablation,
                       int episode)
    : config_(config),
      ablation_(ablation),
      episode_(episode),
      book_(config.market.tick_size),
      fundamental_(config.market.initial_price, config.market.fundamental_volatility,
                   derive_seed(seed, 3)),
      select_rng_(derive_seed(seed, 4)),
      agent_rng_(derive_seed(seed, 5)) {
  config_.validate();
  const std::string& type = config_.population.agent_type;
  population_ = type == "ours"  ? Population::Ours
                : type == "zi"  ? Population::Zi
                : type == "fcn" ? Population::Fcn
                                : Population::AdFcn;
  if (ablation_.active() && population_ != Population::Ours)
    throw std::invalid_argument("ablations apply to the learned population only");

  clock_.T_sim = config_.market.steps;
  clock_.n = config_.market.n_agents;

  const TraitPriors priors = apply_homo(config_.agent.priors, ablation_);
  std::mt19937_64 trait_rng(derive_seed(seed, 1));
  std::mt19937_64 fcn_rng(derive_seed(seed, 2));
  agents_.resize(static_cast<std::size_t>(config_.market.n_agents));
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    AgentRecord& a = agents_[j];
    a.id = static_cast<AgentId>(j + 1);
    const SampledAgent s = sample_agent(priors, trait_rng);
    a.traits = s.traits;
    a.state = s.state;
    a.initial = s.state;
    if (population_ == Population::Fcn || population_ == Population::AdFcn) {
      a.fcn = sample_fcn_params(config_.population.fcn, fcn_rng);
      a.adaptive = AdaptiveState(config_.population.fcn.adaptive_window);
    }
  }

  std::mt19937_64 book_rng(derive_seed(seed, 6));
  seed_book(book_rng);

  mids_.reserve(static_cast<std::size_t>(clock_.T_sim) + 1);
  fundamentals_.reserve(static_cast<std::size_t>(clock_.T_sim) + 1);
  mids_.push_back(book_.mid_price(fallback_price()));
  fundamentals_.push_back(fundamental_.value());
}

double Simulation::fallback_price() const {
  return book_.last_trade_price().value_or(fundamental_.value());
}

void Simulation::seed_book(std::mt19937_64& rng) {
  const MarketConfig& m = config_.market;
  const Ticks center = book_.to_ticks(m.initial_price);
  const auto spread = std::max<Ticks>(
      1, static_cast<Ticks>(std::llround(m.seed_price_range * m.initial_price / m.tick_size)));
  std::uniform_int_distribution<int> who(1, m.n_agents);
  std::uniform_int_distribution<std::int64_t> volume(1, m.seed_order_max_volume);
  std::uniform_int_distribution<Ticks> offset(1, spread);
  for (int k = 0; k < m.seed_orders_per_side; ++k) {
    for (int side = 0; side < 2; ++side) {
      const AgentId id = who(rng);
      const std::int64_t v = volume(rng);
      const Ticks d = offset(rng);
      const Ticks ticks = side == 0 ? std::max<Ticks>(1, center - d) : center + d;
      book_.submit(Order::limit(id, side == 0 ? v : -v, book_.to_price(ticks), 0));
    }
  }
}

DecodedOrder Simulation::policy_order(const Observation& obs, Eigen::VectorXd& input,
                                      SampledAction& sampled) {
  if (!policy_.params) throw std::logic_error("learned agents need a policy");
  if (policy_.normalize && policy_.normalizer) {
    if (policy_.update_normalizer) policy_.normalizer->update(obs);
    input = policy_.normalizer->normalize(obs);
  } else {
    input = Eigen::Map<const Eigen::VectorXd>(obs.data(), kObservationSize);
  }
  if (ablation_.masked()) input[trait_index(*ablation_.trait)] = 0.0;
  if (hooks_.on_policy_query) hooks_.on_policy_query(obs, input);
  const PolicyOutput out = policy_forward(*policy_.params, input);
  sampled = sample_action(out.mean, out.std, agent_rng_);
  return decode_action(sampled.action, mids_.back(), config_.agent.reward, config_.market.tick_size);
}

DecodedOrder Simulation::baseline_order(AgentRecord& agent, double mid) {
  const double spread = config_.population.zi_spread_scale;
  if (population_ == Population::Zi) return zi_order(agent_rng_, mid, spread);
  // Heuristic traders fall back to random unit orders until their horizon
  // of price history exists.
  if (mids_.size() <= static_cast<std::size_t>(agent.fcn.horizon))
    return zi_order(agent_rng_, mid, spread);
  FcnView view{std::span<const double>(mids_), fundamental_.value()};
  if (population_ == Population::Fcn) return fcn_order(agent.fcn, view, agent_rng_);
  return adfcn_update_and_order(agent.fcn, agent.adaptive, view, clock_.t, agent_rng_);
}

bool Simulation::step() {
  if (!clock_.advance()) return false;
  const Step t = clock_.t;
  const MarketConfig& m = config_.market;
  const RewardConfig& rc = config_.agent.reward;

  const double pf = fundamental_.step();
  fundamentals_.push_back(pf);
  if (m.order_lifetime != kNoExpiry) book_.expire_orders(t, m.order_lifetime);
  const double mid = book_.mid_price(fallback_price());
  mids_.push_back(mid);
  const double deviation = tracker_.update(pf, mid, t);

  std::uniform_int_distribution<int> pick(0, m.n_agents - 1);
  AgentRecord& agent = agents_[static_cast<std::size_t>(pick(select_rng_))];
  const Step t_prev = agent.state.last_order_step;
  const std::span<const double> series(mids_);

  double ret = 0.0, vol = 0.0;
  DecodedOrder order;
  Eigen::VectorXd input;
  SampledAction sampled;
  if (population_ == Population::Ours) {
    MarketView view;
    view.mid_prices = series;
    view.now = t;
    view.mid = mid;
    view.fundamental = pf;
    view.buy_depth = book_.depth_weighted_volume(Side::Buy, mid, rc.depth_range, rc.buy_depth_decay);
    view.sell_depth =
        book_.depth_weighted_volume(Side::Sell, mid, rc.depth_range, rc.sell_depth_decay);
    const Observation obs = build_observation(agent.traits, agent.state, view, rc, agent_rng_);
    ret = obs[kReturn];
    vol = obs[kVolatility];
    order = policy_order(obs, input, sampled);
  } else {
    ret = log_return(series, t_prev, t);
    vol = realized_volatility(series, t_prev, t);
    order = baseline_order(agent, mid);
  }

  if (order.signed_volume != 0) {
    const std::vector<Trade> fills =
        book_.submit(Order::limit(agent.id, order.signed_volume, order.price, t));
    if (!fills.empty()) {
      states_scratch_.resize(agents_.size());
      for (std::size_t j = 0; j < agents_.size(); ++j) states_scratch_[j] = agents_[j].state;
      settle_trades(states_scratch_, fills);
      for (std::size_t j = 0; j < agents_.size(); ++j) agents_[j].state = states_scratch_[j];
      trades_.insert(trades_.end(), fills.begin(), fills.end());
    }
  }

  RewardInputs in;
  in.position = agent.state.position;
  in.cash = agent.state.cash;
  in.mid = mid;
  in.ret = ret;
  in.volatility = vol;
  in.alpha = agent.traits.alpha;
  in.buy_depth = book_.depth_weighted_volume(Side::Buy, mid, rc.depth_range, rc.buy_depth_decay);
  in.sell_depth = book_.depth_weighted_volume(Side::Sell, mid, rc.depth_range, rc.sell_depth_decay);
  in.fundamental_deviation = deviation;
  const RewardBreakdown r = reward(in, rc);

  if (population_ == Population::Ours) {
    if (agent.has_previous && hooks_.on_transition) {
      Transition tr;
      tr.obs = agent.previous_input;
      tr.raw_action = agent.previous_raw;
      tr.logprob = agent.previous_logprob;
      tr.reward = r.total;
      tr.next_obs = input;
      tr.episode = episode_;
      tr.gamma = agent.traits.gamma;
      hooks_.on_transition(agent, std::move(tr));
    }
    agent.has_previous = true;
    agent.previous_input = std::move(input);
    agent.previous_raw = sampled.raw;
    agent.previous_logprob = sampled.logprob;
  }

  agent.state.last_order_step = t;
  agent.state.order_count += 1;
  agent.discounted_utility += std::pow(agent.traits.gamma, agent.state.order_count) * r.utility;

  if (hooks_.on_order) {
    OrderEvent ev;
    ev.step = t;
    ev.agent = agent.id;
    ev.order_index = agent.state.order_count;
    ev.order = order;
    ev.reward = r;
    hooks_.on_order(agent, ev);
  }
  return true;
}

void Simulation::run() {
  while (step()) {
  }
}

double Simulation::social_welfare() const {
  double total = 0.0;
  for (const AgentRecord& a : agents_) total += a.discounted_utility;
  return total;
}

}  // namespace hetmarket
