#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hetmarket/config.hpp"
#include "hetmarket/network.hpp"
#include "hetmarket/ppo.hpp"
#include "hetmarket/simulation.hpp"

namespace hetmarket {

struct TrainingLogRow {
  int iteration = 0;  // 1-based update count
  int episode = 0;
  AgentId agent = 0;
  UpdateStats stats;
};

struct TrainOptions {
  AblationSpec ablation;
  std::function<void(const TrainingLogRow&)> on_update;
};

struct TrainingResult {
  PolicyParams params;
  ObservationNormalizer normalizer;
  std::vector<TrainingLogRow> log;
  int episodes = 0;
  std::string stop_reason;  // "max_episodes", "max_updates" or "plateau"
};

/// True once the mean reward averaged over the last `window` updates differs
/// from the average over the `window` before it by less than `tolerance`
/// relative to the earlier average.
bool reward_plateau(const std::vector<TrainingLogRow>& log, int window, double tolerance);

/// Shared-policy training: traits are resampled every episode, each learned
/// agent fills its own rollout buffer, and a full buffer triggers one PPO
/// update of the shared actor-critic.
TrainingResult train(const ExperimentConfig& config, std::uint64_t seed,
                     const TrainOptions& options = {});

/// iteration,mean_reward,actor_loss,critic_loss,entropy
void write_training_log(std::ostream& out, const std::vector<TrainingLogRow>& log);

/// Episode seed used by training episode `episode`.
std::uint64_t training_episode_seed(std::uint64_t seed, int episode);

}  // namespace hetmarket
