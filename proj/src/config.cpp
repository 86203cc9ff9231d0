#include "hetmarket/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hetmarket {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Reads one JSON object, tracking which keys were consumed so that
/// misspelled keys are reported instead of silently ignored.
class Section {
 public:
  Section(const json* obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (obj_ && !obj_->is_object())
      throw ConfigError("config key '" + path_ + "': expected an object");
  }

  template <typename T>
  void optional(const std::string& key, T& out) {
    if (!obj_) return;
    auto it = obj_->find(key);
    seen_.insert(key);
    if (it == obj_->end()) return;
    read(*it, join(path_, key), out);
  }

  template <typename T>
  void required(const std::string& key, T& out) {
    if (!obj_ || !obj_->contains(key))
      throw ConfigError("missing required config key '" + join(path_, key) + "'");
    optional(key, out);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    if (!obj_) return Section(nullptr, join(path_, key));
    auto it = obj_->find(key);
    return Section(it == obj_->end() ? nullptr : &*it, join(path_, key));
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& item : obj_->items())
      if (!seen_.count(item.key()))
        throw ConfigError("unknown config key '" + join(path_, item.key()) + "'");
  }

 private:
  static void read(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) throw ConfigError("config key '" + path + "': expected a number");
    out = v.get<double>();
  }
  static void read(const json& v, const std::string& path, int& out) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + path + "': expected an integer");
    out = v.get<int>();
  }
  static void read(const json& v, const std::string& path, std::int64_t& out) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + path + "': expected an integer");
    out = v.get<std::int64_t>();
  }
  static void read(const json& v, const std::string& path, std::uint64_t& out) {
    if (!v.is_number_unsigned())
      throw ConfigError("config key '" + path + "': expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean()) throw ConfigError("config key '" + path + "': expected a boolean");
    out = v.get<bool>();
  }
  static void read(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) throw ConfigError("config key '" + path + "': expected a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, const std::string& path, std::vector<double>& out) {
    if (!v.is_array()) throw ConfigError("config key '" + path + "': expected an array");
    out.clear();
    for (const auto& e : v) {
      double x = 0;
      read(e, path, x);
      out.push_back(x);
    }
  }
  static void read(const json& v, const std::string& path, std::vector<int>& out) {
    if (!v.is_array()) throw ConfigError("config key '" + path + "': expected an array");
    out.clear();
    for (const auto& e : v) {
      int x = 0;
      read(e, path, x);
      out.push_back(x);
    }
  }

  const json* obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_lifetime(Section& s, Step& lifetime, const json* market) {
  if (market && market->contains("order_lifetime") && (*market)["order_lifetime"].is_string()) {
    std::string text;
    s.optional("order_lifetime", text);
    if (text != "inf")
      throw ConfigError("config key 'market.order_lifetime': expected an integer or \"inf\"");
    lifetime = kNoExpiry;
    return;
  }
  s.optional("order_lifetime", lifetime);
}

ExperimentConfig from_json(const json& root) {
  ExperimentConfig c;
  Section top(&root, "");
  top.optional("seed", c.seed);

  {
    const json* raw = root.contains("market") ? &root["market"] : nullptr;
    Section s = top.child("market");
    if (!raw) throw ConfigError("missing required config key 'market'");
    s.required("n_agents", c.market.n_agents);
    s.required("steps", c.market.steps);
    s.optional("tick_size", c.market.tick_size);
    s.optional("initial_price", c.market.initial_price);
    s.optional("fundamental_volatility", c.market.fundamental_volatility);
    read_lifetime(s, c.market.order_lifetime, raw);
    s.optional("seed_orders_per_side", c.market.seed_orders_per_side);
    s.optional("seed_order_max_volume", c.market.seed_order_max_volume);
    s.optional("seed_price_range", c.market.seed_price_range);
    s.finish();
  }
  {
    Section a = top.child("agent");
    Section p = a.child("priors");
    auto& pr = c.agent.priors;
    p.optional("sigma_mean", pr.sigma_mean);
    p.optional("sigma_std", pr.sigma_std);
    p.optional("alpha_mean", pr.alpha_mean);
    p.optional("alpha_std", pr.alpha_std);
    p.optional("gamma_min", pr.gamma_min);
    p.optional("gamma_max", pr.gamma_max);
    p.optional("position_mean", pr.position_mean);
    p.optional("cash_mean", pr.cash_mean);
    p.finish();
    Section r = a.child("reward");
    auto& rw = c.agent.reward;
    r.optional("short_penalty", rw.short_penalty);
    r.optional("cash_penalty", rw.cash_penalty);
    r.optional("illiquidity_penalty", rw.illiquidity_penalty);
    r.optional("fundamental_penalty", rw.fundamental_penalty);
    r.optional("utility_scale", rw.utility_scale);
    r.optional("imbalance_scale", rw.imbalance_scale);
    r.optional("buy_depth_decay", rw.buy_depth_decay);
    r.optional("sell_depth_decay", rw.sell_depth_decay);
    r.optional("depth_range", rw.depth_range);
    r.optional("max_volume", rw.max_volume);
    r.optional("max_margin", rw.max_margin);
    r.optional("observation_cap", rw.observation_cap);
    r.optional("illiquidity_cap", rw.illiquidity_cap);
    r.finish();
    a.finish();
  }
  {
    Section l = top.child("learning");
    auto& lc = c.learning;
    l.optional("hidden_width", lc.hidden_width);
    l.optional("rollout_length", lc.rollout_length);
    l.optional("max_episodes", lc.max_episodes);
    l.optional("max_updates", lc.max_updates);
    l.optional("plateau_window", lc.plateau_window);
    l.optional("plateau_tolerance", lc.plateau_tolerance);
    l.optional("normalize_observations", lc.normalize_observations);
    l.optional("normalize_rewards", lc.normalize_rewards);
    Section p = l.child("ppo");
    p.optional("actor_lr", lc.ppo.actor_lr);
    p.optional("critic_lr", lc.ppo.critic_lr);
    p.optional("clip_epsilon", lc.ppo.clip_epsilon);
    p.optional("epochs", lc.ppo.epochs);
    p.optional("minibatch", lc.ppo.minibatch);
    p.optional("gae_lambda", lc.ppo.gae_lambda);
    p.optional("entropy_coef", lc.ppo.entropy_coef);
    p.optional("grad_clip", lc.ppo.grad_clip);
    p.optional("optimizer", lc.ppo.optimizer);
    p.finish();
    l.finish();
  }
  {
    Section p = top.child("population");
    auto& pc = c.population;
    p.optional("agent_type", pc.agent_type);
    p.optional("zi_spread_scale", pc.zi_spread_scale);
    Section f = p.child("fcn");
    f.optional("fundamental_log_mean", pc.fcn.fundamental_log_mean);
    f.optional("chartist_log_mean", pc.fcn.chartist_log_mean);
    f.optional("noise_log_mean", pc.fcn.noise_log_mean);
    f.optional("weight_log_std", pc.fcn.weight_log_std);
    f.optional("horizon_min", pc.fcn.horizon_min);
    f.optional("horizon_max", pc.fcn.horizon_max);
    f.optional("noise_scale", pc.fcn.noise_scale);
    f.optional("risk_aversion_min", pc.fcn.risk_aversion_min);
    f.optional("risk_aversion_max", pc.fcn.risk_aversion_max);
    f.optional("max_volume", pc.fcn.max_volume);
    f.optional("adaptive_window", pc.fcn.adaptive_window);
    f.finish();
    p.finish();
  }
  {
    Section e = top.child("evaluation");
    auto& ec = c.evaluation;
    e.optional("steps_per_bar", ec.steps_per_bar);
    e.optional("bars_per_series", ec.bars_per_series);
    e.optional("acorr_lags", ec.acorr_lags);
    e.optional("tail_fraction", ec.tail_fraction);
    e.optional("tail_band_low", ec.tail_band_low);
    e.optional("tail_band_high", ec.tail_band_high);
    e.optional("weight_return", ec.weight_return);
    e.optional("weight_tail", ec.weight_tail);
    e.optional("weight_acorr", ec.weight_acorr);
    e.optional("max_cloud_points", ec.max_cloud_points);
    e.optional("descending_tail_indexing", ec.descending_tail_indexing);
    e.finish();
  }
  {
    Section k = top.child("calibration");
    auto& cc = c.calibration;
    k.optional("sigma_std", cc.sigma_std);
    k.optional("alpha_std", cc.alpha_std);
    k.optional("gamma_min", cc.gamma_min);
    k.optional("trials", cc.trials);
    k.optional("simulation_episodes", cc.simulation_episodes);
    k.optional("threads", cc.threads);
    k.finish();
  }
  top.finish();
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["market"] = {
      {"n_agents", c.market.n_agents},
      {"steps", c.market.steps},
      {"tick_size", c.market.tick_size},
      {"initial_price", c.market.initial_price},
      {"fundamental_volatility", c.market.fundamental_volatility},
      {"seed_orders_per_side", c.market.seed_orders_per_side},
      {"seed_order_max_volume", c.market.seed_order_max_volume},
      {"seed_price_range", c.market.seed_price_range},
  };
  if (c.market.order_lifetime == kNoExpiry)
    j["market"]["order_lifetime"] = "inf";
  else
    j["market"]["order_lifetime"] = c.market.order_lifetime;
  const auto& pr = c.agent.priors;
  const auto& rw = c.agent.reward;
  j["agent"]["priors"] = {
      {"sigma_mean", pr.sigma_mean},   {"sigma_std", pr.sigma_std},
      {"alpha_mean", pr.alpha_mean},   {"alpha_std", pr.alpha_std},
      {"gamma_min", pr.gamma_min},     {"gamma_max", pr.gamma_max},
      {"position_mean", pr.position_mean}, {"cash_mean", pr.cash_mean},
  };
  j["agent"]["reward"] = {
      {"short_penalty", rw.short_penalty},
      {"cash_penalty", rw.cash_penalty},
      {"illiquidity_penalty", rw.illiquidity_penalty},
      {"fundamental_penalty", rw.fundamental_penalty},
      {"utility_scale", rw.utility_scale},
      {"imbalance_scale", rw.imbalance_scale},
      {"buy_depth_decay", rw.buy_depth_decay},
      {"sell_depth_decay", rw.sell_depth_decay},
      {"depth_range", rw.depth_range},
      {"max_volume", rw.max_volume},
      {"max_margin", rw.max_margin},
      {"observation_cap", rw.observation_cap},
      {"illiquidity_cap", rw.illiquidity_cap},
  };
  const auto& lc = c.learning;
  j["learning"] = {
      {"hidden_width", lc.hidden_width},
      {"rollout_length", lc.rollout_length},
      {"max_episodes", lc.max_episodes},
      {"max_updates", lc.max_updates},
      {"plateau_window", lc.plateau_window},
      {"plateau_tolerance", lc.plateau_tolerance},
      {"normalize_observations", lc.normalize_observations},
      {"normalize_rewards", lc.normalize_rewards},
      {"ppo",
       {
           {"actor_lr", lc.ppo.actor_lr},
           {"critic_lr", lc.ppo.critic_lr},
           {"clip_epsilon", lc.ppo.clip_epsilon},
           {"epochs", lc.ppo.epochs},
           {"minibatch", lc.ppo.minibatch},
           {"gae_lambda", lc.ppo.gae_lambda},
           {"entropy_coef", lc.ppo.entropy_coef},
           {"grad_clip", lc.ppo.grad_clip},
           {"optimizer", lc.ppo.optimizer},
       }},
  };
  const auto& pc = c.population;
  j["population"] = {
      {"agent_type", pc.agent_type},
      {"zi_spread_scale", pc.zi_spread_scale},
      {"fcn",
       {
           {"fundamental_log_mean", pc.fcn.fundamental_log_mean},
           {"chartist_log_mean", pc.fcn.chartist_log_mean},
           {"noise_log_mean", pc.fcn.noise_log_mean},
           {"weight_log_std", pc.fcn.weight_log_std},
           {"horizon_min", pc.fcn.horizon_min},
           {"horizon_max", pc.fcn.horizon_max},
           {"noise_scale", pc.fcn.noise_scale},
           {"risk_aversion_min", pc.fcn.risk_aversion_min},
           {"risk_aversion_max", pc.fcn.risk_aversion_max},
           {"max_volume", pc.fcn.max_volume},
           {"adaptive_window", pc.fcn.adaptive_window},
       }},
  };
  const auto& ec = c.evaluation;
  j["evaluation"] = {
      {"steps_per_bar", ec.steps_per_bar},
      {"bars_per_series", ec.bars_per_series},
      {"acorr_lags", ec.acorr_lags},
      {"tail_fraction", ec.tail_fraction},
      {"tail_band_low", ec.tail_band_low},
      {"tail_band_high", ec.tail_band_high},
      {"weight_return", ec.weight_return},
      {"weight_tail", ec.weight_tail},
      {"weight_acorr", ec.weight_acorr},
      {"max_cloud_points", ec.max_cloud_points},
      {"descending_tail_indexing", ec.descending_tail_indexing},
  };
  const auto& cc = c.calibration;
  j["calibration"] = {
      {"sigma_std", cc.sigma_std},
      {"alpha_std", cc.alpha_std},
      {"gamma_min", cc.gamma_min},
      {"trials", cc.trials},
      {"simulation_episodes", cc.simulation_episodes},
      {"threads", cc.threads},
  };
  return j;
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace

std::vector<int> EvaluationConfig::lags() const {
  if (!acorr_lags.empty()) return acorr_lags;
  std::vector<int> lags;
  for (int tau = 1; tau <= 70; ++tau) lags.push_back(tau);
  return lags;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (market.n_agents < 1) fail("market.n_agents", "must be >= 1");
  if (market.steps < 1) fail("market.steps", "must be >= 1");
  if (!(market.tick_size > 0)) fail("market.tick_size", "must be positive");
  if (!(market.initial_price > 0)) fail("market.initial_price", "must be positive");
  if (market.fundamental_volatility < 0) fail("market.fundamental_volatility", "must be >= 0");
  if (market.order_lifetime < 1) fail("market.order_lifetime", "must be >= 1 or \"inf\"");
  if (market.seed_orders_per_side < 0) fail("market.seed_orders_per_side", "must be >= 0");
  if (market.seed_order_max_volume < 1) fail("market.seed_order_max_volume", "must be >= 1");
  if (!(market.seed_price_range > 0 && market.seed_price_range < 1))
    fail("market.seed_price_range", "must lie in (0, 1)");
  try {
    agent.priors.validate();
  } catch (const std::invalid_argument& e) {
    fail("agent.priors", e.what());
  }
  try {
    agent.reward.validate();
  } catch (const std::invalid_argument& e) {
    fail("agent.reward", e.what());
  }
  try {
    learning.ppo.validate();
  } catch (const std::invalid_argument& e) {
    fail("learning.ppo", e.what());
  }
  if (learning.hidden_width < 1) fail("learning.hidden_width", "must be >= 1");
  if (learning.rollout_length < 1) fail("learning.rollout_length", "must be >= 1");
  if (learning.max_episodes < 0) fail("learning.max_episodes", "must be >= 0");
  if (learning.max_updates < 0) fail("learning.max_updates", "must be >= 0");
  if (learning.plateau_window < 0) fail("learning.plateau_window", "must be >= 0");
  if (!(learning.plateau_tolerance > 0)) fail("learning.plateau_tolerance", "must be positive");
  const auto& type = population.agent_type;
  if (type != "ours" && type != "zi" && type != "fcn" && type != "adfcn")
    fail("population.agent_type", "must be one of ours, zi, fcn, adfcn");
  if (population.zi_spread_scale < 0) fail("population.zi_spread_scale", "must be >= 0");
  try {
    population.fcn.validate();
  } catch (const std::invalid_argument& e) {
    fail("population.fcn", e.what());
  }
  if (evaluation.steps_per_bar < 1) fail("evaluation.steps_per_bar", "must be >= 1");
  if (evaluation.bars_per_series < 2) fail("evaluation.bars_per_series", "must be >= 2");
  for (int lag : evaluation.acorr_lags)
    if (lag < 1) fail("evaluation.acorr_lags", "lags must be >= 1");
  if (!(evaluation.tail_fraction > 0 && evaluation.tail_fraction < 1))
    fail("evaluation.tail_fraction", "must lie in (0, 1)");
  if (evaluation.tail_band_low > evaluation.tail_band_high)
    fail("evaluation.tail_band_low", "must not exceed tail_band_high");
  if (evaluation.weight_return < 0 || evaluation.weight_tail < 0 || evaluation.weight_acorr < 0)
    fail("evaluation.weight_*", "OT weights must be >= 0");
  if (evaluation.max_cloud_points < 1) fail("evaluation.max_cloud_points", "must be >= 1");
  for (double v : calibration.sigma_std)
    if (v < 0) fail("calibration.sigma_std", "candidates must be >= 0");
  for (double v : calibration.alpha_std)
    if (v < 0) fail("calibration.alpha_std", "candidates must be >= 0");
  for (double v : calibration.gamma_min)
    if (!(v >= 0 && v <= agent.priors.gamma_max))
      fail("calibration.gamma_min", "candidates must lie in [0, gamma_max]");
  if (calibration.trials < 1) fail("calibration.trials", "must be >= 1");
  if (calibration.simulation_episodes < 1) fail("calibration.simulation_episodes", "must be >= 1");
  if (calibration.threads < 0) fail("calibration.threads", "must be >= 0");
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& source) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ":" + std::to_string(line_of_offset(json_text, e.byte)) +
                      ": malformed config: " + e.what());
  }
  if (!root.is_object()) throw ConfigError(source + ": config must be a JSON object");
  try {
    return from_json(root);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

std::string config_to_json(const ExperimentConfig& config) { return to_json(config).dump(2); }

std::uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return to_json(a) == to_json(b);
}

}  // namespace hetmarket
