#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hetmarket/calibration.hpp"
#include "hetmarket/checkpoint.hpp"
#include "hetmarket/config.hpp"
#include "hetmarket/simulation.hpp"
#include "hetmarket/stylized_facts.hpp"
#include "hetmarket/trainer.hpp"

namespace hetmarket {

namespace fs = std::filesystem;

/// Writes checkpoint.bin, training_log.csv, config.json and run_log.txt.
TrainingResult run_train(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out);

/// Seed of evaluation trial `trial`.
std::uint64_t simulation_trial_seed(std::uint64_t seed, int trial);

/// Frozen-policy episode. `checkpoint` is required for learned populations.
Simulation run_episode(const ExperimentConfig& config, const Checkpoint* checkpoint,
                       std::uint64_t seed, AblationSpec ablation = {},
                       SimulationHooks hooks = {});

/// Per trial k, a directory trial_k with prices.csv, trades.csv, agents.csv,
/// rewards.csv, book.csv and bars.csv. trials = 0 writes nothing.
void run_simulate(const ExperimentConfig& config, const Checkpoint* checkpoint,
                  std::uint64_t seed, int trials, const fs::path& out);

struct EvaluationResult {
  StylizedReport report;
  std::optional<OtScores> ot;
  double aggregate = 0.0;
};

/// Stylized facts of `bars`, and OT distances against `real` when given.
/// Writes report.csv and, with real data, ot.csv.
EvaluationResult run_evaluate(const ExperimentConfig& config, const ReturnSeries& bars,
                              const std::optional<ReturnSeries>& real, std::uint64_t seed,
                              const fs::path& out);

/// Bars rebuilt from a prices.csv (step,mid_price,...) and trades.csv pair.
ReturnSeries bars_from_simulation_csv(const std::string& prices_path,
                                      const std::optional<std::string>& trades_path,
                                      const EvaluationConfig& config);

/// Writes scores.csv, failures.csv, best_config.json and run_log.txt.
/// With `resume`, rows already present in scores.csv are kept.
CalibrationResult run_calibrate(const ExperimentConfig& config, const ReturnSeries& real,
                                std::uint64_t seed, bool resume, const fs::path& out,
                                PipelineOptions pipeline = {});

struct AblationTrial {
  int trial = 0;
  double baseline = 0.0;
  double ablated = 0.0;
};

struct AblationResult {
  AblationSpec spec;
  std::vector<AblationTrial> trials;
  double baseline_mean = 0.0, baseline_std = 0.0;
  double ablated_mean = 0.0, ablated_std = 0.0;
};

/// Social welfare of the heterogeneous population and of the ablated one,
/// per trial, on shared trial seeds. Without a checkpoint a policy is
/// trained first. Writes welfare.csv, summary.csv and run_log.txt.
AblationResult run_ablate(const ExperimentConfig& config, const Checkpoint* checkpoint,
                          const AblationSpec& spec, std::uint64_t seed, int trials,
                          const fs::path& out);

/// Second-hidden-layer activations for every policy query of one episode,
/// next to the raw observation. Writes activations.csv; returns the row count.
std::size_t run_probe(const ExperimentConfig& config, const Checkpoint& checkpoint,
                      std::uint64_t seed, const fs::path& out);

/// Mean and sample standard deviation.
std::pair<double, double> mean_and_std(const std::vector<double>& values);

}  // namespace hetmarket
