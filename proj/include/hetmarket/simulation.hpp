#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hetmarket/agent.hpp"
#include "hetmarket/baselines.hpp"
#include "hetmarket/config.hpp"
#include "hetmarket/network.hpp"
#include "hetmarket/order_book.hpp"
#include "hetmarket/ppo.hpp"

namespace hetmarket {

enum class TraitKind { Sigma, Alpha, Gamma };
enum class AblationMode { Homo, Masked };

/// Removes heterogeneity in one trait: `Homo` fixes it at the prior mean for
/// every agent, `Masked` hides it from the policy input.
struct AblationSpec {
  std::optional<TraitKind> trait;
  AblationMode mode = AblationMode::Homo;

  bool active() const { return trait.has_value(); }
  bool homo() const { return active() && mode == AblationMode::Homo; }
  bool masked() const { return active() && mode == AblationMode::Masked; }
  std::string label() const;  // "none", "homo-gamma", "masked-alpha", ...

  /// trait in {sigma, alpha, gamma}, mode in {homo, masked}.
  static AblationSpec parse(const std::string& trait, const std::string& mode);
};

/// Priors with the ablated trait collapsed to its mean.
TraitPriors apply_homo(const TraitPriors& priors, const AblationSpec& spec);

/// Observation component that carries `trait`.
ObservationIndex trait_index(TraitKind trait);

/// sum_i gamma^i u_i over one agent's utilities, i counted from 1.
double discounted_utility(double gamma, std::span<const double> utilities);

/// Deterministic child seed (splitmix64 over base, stream and index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

struct AgentRecord {
  AgentId id = 0;
  AgentTraits traits;
  AgentState state;
  AgentState initial;
  FcnParams fcn;
  AdaptiveState adaptive;

  // Previous policy query, paired with the reward of the next selection.
  bool has_previous = false;
  Eigen::VectorXd previous_input;
  Eigen::Vector2d previous_raw = Eigen::Vector2d::Zero();
  double previous_logprob = 0.0;

  double discounted_utility = 0.0;  // sum_i gamma^i u_i
};

/// How learned-policy agents query the shared network.
struct PolicyRuntime {
  const PolicyParams* params = nullptr;
  ObservationNormalizer* normalizer = nullptr;
  bool normalize = true;
  bool update_normalizer = false;
};

struct OrderEvent {
  Step step = 0;
  AgentId agent = 0;
  int order_index = 0;  // i, 1-based count of the agent's selections
  DecodedOrder order;
  RewardBreakdown reward;
};

struct SimulationHooks {
  /// Learned agents from their second selection on.
  std::function<void(const AgentRecord&, Transition&&)> on_transition;
  /// Every policy query: raw observation and the network input.
  std::function<void(const Observation&, const Eigen::VectorXd&)> on_policy_query;
  std::function<void(const AgentRecord&, const OrderEvent&)> on_order;
};

/// One episode of the market. Index t of the price series is the mid price
/// recorded at step t; index 0 is the seeded book before trading.
class Simulation {
 public:
  Simulation(const ExperimentConfig& config, std::uint64_t seed, AblationSpec ablation = {},
             int episode = 0);

  void set_policy(const PolicyRuntime& runtime) { policy_ = runtime; }
  void set_hooks(SimulationHooks hooks) { hooks_ = std::move(hooks); }

  /// Advances one step; false once T_sim steps have run.
  bool step();
  void run();

  Step now() const { return clock_.t; }
  const std::vector<double>& mid_prices() const { return mids_; }
  const std::vector<double>& fundamental_prices() const { return fundamentals_; }
  const std::vector<Trade>& trades() const { return trades_; }
  const std::vector<AgentRecord>& agents() const { return agents_; }
  const OrderBook& book() const { return book_; }
  const ExperimentConfig& config() const { return config_; }
  const AblationSpec& ablation() const { return ablation_; }
  int episode() const { return episode_; }

  /// Sum over agents of discounted cumulative utilities.
  double social_welfare() const;

 private:
  double fallback_price() const;
  void seed_book(std::mt19937_64& rng);
  DecodedOrder policy_order(const Observation& obs, Eigen::VectorXd& input,
                            SampledAction& sampled);
  DecodedOrder baseline_order(AgentRecord& agent, double mid);

  ExperimentConfig config_;
  AblationSpec ablation_;
  int episode_;
  OrderBook book_;
  FundamentalProcess fundamental_;
  MarketClock clock_;
  DeviationTracker tracker_;
  std::vector<AgentRecord> agents_;
  std::vector<double> mids_;
  std::vector<double> fundamentals_;
  std::vector<Trade> trades_;
  std::vector<AgentState> states_scratch_;
  std::mt19937_64 select_rng_;
  std::mt19937_64 agent_rng_;
  PolicyRuntime policy_;
  SimulationHooks hooks_;
  enum class Population { Ours, Zi, Fcn, AdFcn } population_;
};

}  // namespace hetmarket
