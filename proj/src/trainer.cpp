#include "hetmarket/trainer.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "hetmarket/csv.hpp"

namespace hetmarket {

namespace {

constexpr std::uint64_t kInitStream = 10;
constexpr std::uint64_t kShuffleStream = 11;
constexpr std::uint64_t kEpisodeStream = 20;

double mean_reward(const std::vector<TrainingLogRow>& log, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) sum += log[i].stats.mean_reward;
  return sum / static_cast<double>(end - begin);
}

}  // namespace

std::uint64_t training_episode_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, kEpisodeStream, static_cast<std::uint64_t>(episode));
}

bool reward_plateau(const std::vector<TrainingLogRow>& log, int window, double tolerance) {
  if (window <= 0) return false;
  const auto w = static_cast<std::size_t>(window);
  if (log.size() < 2 * w) return false;
  const std::size_t n = log.size();
  const double recent = mean_reward(log, n - w, n);
  const double earlier = mean_reward(log, n - 2 * w, n - w);
  const double scale = std::max(std::abs(earlier), 1e-12);
  return std::abs(recent - earlier) / scale < tolerance;
}

TrainingResult train(const ExperimentConfig& config, std::uint64_t seed,
                     const TrainOptions& options) {
  config.validate();
  if (config.population.agent_type != "ours")
    throw std::invalid_argument("training requires population.agent_type \"ours\"");
  const LearningConfig& lc = config.learning;

  TrainingResult result;
  result.params = init_params(lc.hidden_width, derive_seed(seed, kInitStream));
  PpoLearner learner(result.params, lc.ppo);
  std::mt19937_64 shuffle_rng(derive_seed(seed, kShuffleStream));

  std::vector<RolloutBuffer> buffers;
  buffers.reserve(static_cast<std::size_t>(config.market.n_agents));
  for (int j = 0; j < config.market.n_agents; ++j)
    buffers.emplace_back(static_cast<AgentId>(j + 1), static_cast<std::size_t>(lc.rollout_length));

  RewardScaler scaler(static_cast<std::size_t>(config.market.n_agents));
  bool stop = false;
  for (int e = 0; e < lc.max_episodes && !stop; ++e) {
    Simulation sim(config, training_episode_seed(seed, e), options.ablation, e);
    PolicyRuntime runtime;
    runtime.params = &result.params;
    runtime.normalizer = &result.normalizer;
    runtime.normalize = lc.normalize_observations;
    runtime.update_normalizer = lc.normalize_observations;
    sim.set_policy(runtime);

    SimulationHooks hooks;
    hooks.on_transition = [&](const AgentRecord& agent, Transition&& tr) {
      if (stop) return;
      const auto slot = static_cast<std::size_t>(agent.id - 1);
      RolloutBuffer& buffer = buffers[slot];
      if (lc.normalize_rewards) {
        tr.raw_reward = tr.reward;
        tr.reward = scaler.scale(slot, tr.reward, agent.traits.gamma);
      }
      buffer.push(std::move(tr));
      if (!buffer.full()) return;
      TrainingLogRow row;
      row.iteration = static_cast<int>(result.log.size()) + 1;
      row.episode = e;
      row.agent = agent.id;
      row.stats = learner.update(buffer, agent.traits.gamma, shuffle_rng);
      result.log.push_back(row);
      if (options.on_update) options.on_update(row);
      if (lc.max_updates > 0 && row.iteration >= lc.max_updates) {
        stop = true;
        result.stop_reason = "max_updates";
      } else if (reward_plateau(result.log, lc.plateau_window, lc.plateau_tolerance)) {
        stop = true;
        result.stop_reason = "plateau";
      }
    };
    sim.set_hooks(std::move(hooks));
    scaler.reset_returns();
    while (!stop && sim.step()) {
    }
    result.episodes = e + 1;
  }
  if (result.stop_reason.empty()) result.stop_reason = "max_episodes";
  return result;
}

void write_training_log(std::ostream& out, const std::vector<TrainingLogRow>& log) {
  CsvWriter w(out);
  w.header({"iteration", "mean_reward", "actor_loss", "critic_loss", "entropy"});
  for (const TrainingLogRow& row : log) {
    w.field(row.iteration);
    w.field(row.stats.mean_reward);
    w.field(row.stats.actor_loss);
    w.field(row.stats.critic_loss);
    w.field(row.stats.entropy);
    w.end_row();
  }
}

}  // namespace hetmarket
