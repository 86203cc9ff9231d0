#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hetmarket/config.hpp"
#include "hetmarket/point_cloud.hpp"
#include "hetmarket/stylized_facts.hpp"

namespace hetmarket {

struct PolicyParams;
class ObservationNormalizer;

/// One grid point of the trait-prior search.
struct Candidate {
  int id = 0;
  double lambda_sigma = 0.0;  // std of the uninformedness prior
  double lambda_alpha = 0.0;  // std of the risk-aversion prior
  double lambda_gamma = 0.0;  // lower bound of the discount-factor prior
};

/// Cartesian product of the calibration axes in sigma-major order. An empty
/// axis contributes the base config's prior value.
std::vector<Candidate> calibration_grid(const ExperimentConfig& config);

ExperimentConfig apply_candidate(ExperimentConfig config, const Candidate& candidate);

struct CandidateScore {
  Candidate candidate;
  OtScores ot;  // averaged over trials
  double aggregate = 0.0;
};

struct CandidateFailure {
  Candidate candidate;
  std::string error;
};

/// OT distances of one trial of one candidate against the real clouds.
using TrialEvaluator = std::function<OtScores(const Candidate&, int trial)>;

struct CalibrationOptions {
  int trials = 1;
  int threads = 1;  // 0: hardware concurrency
  double weight_return = 1.0;
  double weight_tail = 1.0;
  double weight_acorr = 1.0;
  /// Rows already scored (resume); those candidates are not re-run.
  std::vector<CandidateScore> completed;
  std::function<void(const CandidateScore&)> on_score;
  std::function<void(const CandidateFailure&)> on_failure;
};

struct CalibrationResult {
  std::vector<CandidateScore> table;  // sorted by candidate id
  std::vector<CandidateFailure> failures;
  std::optional<CandidateScore> best;
};

/// Scores every candidate and returns the argmin of the weighted aggregate.
/// A candidate whose evaluation throws is recorded as a failure and skipped.
CalibrationResult calibrate(const std::vector<Candidate>& grid, const TrialEvaluator& evaluate,
                            const CalibrationOptions& options);

/// Bars of `episodes` frozen-policy (or baseline) episodes, concatenated.
ReturnSeries simulate_returns(const ExperimentConfig& config, const PolicyParams* params,
                              const ObservationNormalizer* normalizer, std::uint64_t seed,
                              int episodes);

struct PipelineOptions {
  /// Reuse one trained policy for every candidate instead of training a
  /// fresh one per candidate and trial.
  const PolicyParams* shared_params = nullptr;
  const ObservationNormalizer* shared_normalizer = nullptr;
};

/// Train (unless a shared policy is given), simulate and compare. Seeds
/// depend on the trial only, so every candidate sees the same randomness.
TrialEvaluator make_pipeline_evaluator(const ExperimentConfig& base, std::uint64_t seed,
                                       CloudSet real, PipelineOptions options = {});

/// candidate_id,lambda_sigma,lambda_alpha,lambda_gamma,OT_r,OT_t,OT_as,OT_bar
void write_score_header(std::ostream& out);
void write_score_row(std::ostream& out, const CandidateScore& score);
void write_score_table(std::ostream& out, const std::vector<CandidateScore>& table);
std::vector<CandidateScore> read_score_table(const std::string& path);

}  // namespace hetmarket
