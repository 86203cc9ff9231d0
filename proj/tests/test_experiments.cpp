#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "hetmarket/csv.hpp"
#include "hetmarket/experiments.hpp"

using namespace hetmarket;

namespace {

ExperimentConfig small(const std::string& type = "ours") {
  ExperimentConfig c = parse_config(R"({"market": {"n_agents": 8, "steps": 3000},
                                        "learning": {"hidden_width": 8, "rollout_length": 32,
                                                     "max_episodes": 1,
                                                     "ppo": {"minibatch": 16}},
                                        "evaluation": {"steps_per_bar": 10,
                                                       "bars_per_series": 100,
                                                       "max_cloud_points": 200}})");
  c.population.agent_type = type;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("hetmarket_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Checkpoint checkpoint_for(const ExperimentConfig& c) {
  return Checkpoint{init_params(c.learning.hidden_width, 5), ObservationNormalizer{}, config_hash(c)};
}

}  // namespace

TEST(MeanAndStd, SampleStandardDeviation) {
  const auto [m, s] = mean_and_std({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_DOUBLE_EQ(s, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(mean_and_std({7.0}).second, 0.0);
}

TEST(RunTrain, WritesArtifactsDeterministically) {
  const ExperimentConfig c = small();
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  run_train(c, 3, a);
  run_train(c, 3, b);
  for (const char* f : {"checkpoint.bin", "training_log.csv", "config.json", "run_log.txt"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(load_config((a / "config.json").string()), c);
  const Checkpoint ck = load_checkpoint((a / "checkpoint.bin").string());
  EXPECT_EQ(ck.config_hash, config_hash(c));
  EXPECT_NE(slurp(a / "run_log.txt").find("stop_reason: max_episodes"), std::string::npos);
}

TEST(RunSimulate, ZeroTrialsWritesNothing) {
  const fs::path out = scratch("sim_zero");
  const ExperimentConfig c = small("zi");
  run_simulate(c, nullptr, 1, 0, out);
  EXPECT_FALSE(fs::exists(out) && !fs::is_empty(out));
  EXPECT_THROW(run_simulate(c, nullptr, 1, -1, out), std::invalid_argument);
}

TEST(RunSimulate, TrialsAreReproducibleAndDistinct) {
  const ExperimentConfig c = small();
  const Checkpoint ck = checkpoint_for(c);
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  run_simulate(c, &ck, 9, 2, a);
  run_simulate(c, &ck, 9, 2, b);
  for (const char* f : {"prices.csv", "trades.csv", "agents.csv", "rewards.csv", "book.csv", "bars.csv"}) {
    ASSERT_TRUE(fs::exists(a / "trial_1" / f)) << f;
    EXPECT_EQ(slurp(a / "trial_0" / f), slurp(b / "trial_0" / f)) << f;
  }
  EXPECT_NE(slurp(a / "trial_0" / "prices.csv"), slurp(a / "trial_1" / "prices.csv"));
  EXPECT_THROW(run_simulate(c, nullptr, 9, 1, scratch("sim_no_ck")), std::invalid_argument);
}

TEST(RunSimulate, BarsRebuiltFromCsvMatch) {
  const ExperimentConfig c = small("fcn");
  const fs::path out = scratch("sim_bars");
  run_simulate(c, nullptr, 4, 1, out);
  const ReturnSeries rebuilt = bars_from_simulation_csv((out / "trial_0" / "prices.csv").string(),
                                                        (out / "trial_0" / "trades.csv").string(),
                                                        c.evaluation);
  const Simulation sim = run_episode(c, nullptr, simulation_trial_seed(4, 0));
  const ReturnSeries direct =
      make_bars(sim.mid_prices(), sim.trades(), c.evaluation.steps_per_bar, c.evaluation.bars_per_series);
  EXPECT_EQ(rebuilt.returns, direct.returns);
  EXPECT_EQ(rebuilt.volumes, direct.volumes);
  std::ostringstream bars;
  write_bars_csv(bars, direct);
  EXPECT_EQ(slurp(out / "trial_0" / "bars.csv"), bars.str());
}

TEST(RunEvaluate, RealDataAgainstItself) {
  std::mt19937_64 rng(1);
  std::student_t_distribution<double> t(3.0);
  ReturnSeries real;
  for (int d = 0; d < 5; ++d) {
    std::vector<double> r(400), v(400);
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = 0.001 * t(rng);
      v[i] = 1.0 + 1e3 * std::abs(r[i]);
    }
    real.returns.push_back(r);
    real.volumes.push_back(v);
  }
  const fs::path out = scratch("eval_self");
  const EvaluationResult e = run_evaluate(small(), real, real, 3, out);
  ASSERT_TRUE(e.ot);
  EXPECT_EQ(e.ot->ret, 0.0);
  EXPECT_EQ(e.ot->tail, 0.0);
  EXPECT_NEAR(e.ot->acorr, 0.0, 1e-12);
  EXPECT_TRUE(e.report.kurtosis_pass);
  EXPECT_TRUE(e.report.vv_pass);
  EXPECT_TRUE(fs::exists(out / "report.csv"));
  EXPECT_TRUE(fs::exists(out / "ot.csv"));
}

TEST(RunEvaluate, GaussianReturnsFailKurtosis) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.001);
  ReturnSeries bars;
  for (int d = 0; d < 50; ++d) {
    std::vector<double> r(400);
    for (double& x : r) x = n(rng);
    bars.returns.push_back(r);
  }
  const EvaluationResult e = run_evaluate(small(), bars, std::nullopt, 3, scratch("eval_gauss"));
  EXPECT_LE(e.report.kurtosis, 0.05);
  EXPECT_FALSE(e.ot);
}

TEST(RunEvaluate, ZeroIntelligenceHasNoLongMemory) {
  ExperimentConfig c = small("zi");
  c.market.n_agents = 50;
  c.market.steps = 40000;
  c.evaluation.steps_per_bar = 20;
  const Simulation sim = run_episode(c, nullptr, 8);
  const ReturnSeries bars = make_bars(sim.mid_prices(), sim.trades(), c.evaluation.steps_per_bar,
                                      c.evaluation.bars_per_series);
  const EvaluationResult e = run_evaluate(c, bars, std::nullopt, 1, scratch("eval_zi"));
  EXPECT_FALSE(e.report.acorr_pass) << "zeta " << e.report.acorr << " " << e.report.acorr_note;
}

TEST(RunAblate, WritesWelfareAndScopeFlags) {
  const ExperimentConfig c = small();
  const Checkpoint ck = checkpoint_for(c);
  const fs::path out = scratch("ablate");
  const AblationResult r = run_ablate(c, &ck, AblationSpec::parse("gamma", "masked"), 2, 3, out);
  ASSERT_EQ(r.trials.size(), 3u);
  std::vector<double> base;
  for (const auto& t : r.trials) base.push_back(t.baseline);
  EXPECT_DOUBLE_EQ(r.baseline_std, mean_and_std(base).second);
  const std::string log = slurp(out / "run_log.txt");
  EXPECT_NE(log.find("trait_sampling_modified: false"), std::string::npos);
  EXPECT_NE(log.find("observation_input_modified: true"), std::string::npos);
  const CsvTable welfare = read_csv_file((out / "welfare.csv").string());
  EXPECT_EQ(welfare.rows.size(), 6u);
  EXPECT_EQ(welfare.rows[1][1], "masked-gamma");

  const fs::path homo = scratch("ablate_homo");
  const AblationResult h = run_ablate(c, &ck, AblationSpec::parse("gamma", "homo"), 2, 3, homo);
  EXPECT_NE(slurp(homo / "run_log.txt").find("trait_sampling_modified: true"), std::string::npos);
  // Baselines share trial seeds and the policy, so they agree across variants.
  for (int k = 0; k < 3; ++k) EXPECT_EQ(h.trials[k].baseline, r.trials[k].baseline);
  EXPECT_THROW(run_ablate(c, &ck, AblationSpec{}, 2, 3, homo), std::invalid_argument);
}

TEST(RunProbe, RowsAndColumns) {
  ExperimentConfig c = small();
  c.market.steps = 500;
  const Checkpoint ck = checkpoint_for(c);
  const fs::path out = scratch("probe");
  const std::size_t rows = run_probe(c, ck, 4, out);
  EXPECT_EQ(rows, 500u);  // one policy query per step
  const CsvTable t = read_csv_file((out / "activations.csv").string());
  EXPECT_EQ(t.rows.size(), rows);
  EXPECT_EQ(t.header.size(), static_cast<std::size_t>(c.learning.hidden_width) + 11);
  EXPECT_EQ(t.header[0], "h0");
  EXPECT_EQ(t.header[8], observation_names()[0]);
  // Identical observations map to identical activation rows.
  std::map<std::vector<std::string>, std::vector<std::string>> seen;
  for (const auto& row : t.rows) {
    std::vector<std::string> obs(row.begin() + 8, row.end()), act(row.begin(), row.begin() + 8);
    auto [it, inserted] = seen.emplace(obs, act);
    if (!inserted) {
      EXPECT_EQ(it->second, act);
    }
  }
}

TEST(RunCalibrate, SingleCandidateAndResume) {
  ExperimentConfig c = small("zi");
  c.calibration.sigma_std = {0.005};
  const Simulation sim = run_episode(c, nullptr, 100);
  const ReturnSeries real = make_bars(sim.mid_prices(), sim.trades(), c.evaluation.steps_per_bar,
                                      c.evaluation.bars_per_series);
  const fs::path out = scratch("calibrate");
  const CalibrationResult r = run_calibrate(c, real, 1, false, out);
  EXPECT_EQ(read_score_table((out / "scores.csv").string()).size(), 1u);
  ASSERT_TRUE(r.best);
  EXPECT_TRUE(fs::exists(out / "best_config.json"));
  const std::string before = slurp(out / "scores.csv");

  c.calibration.sigma_std = {0.005, 0.01};
  const CalibrationResult resumed = run_calibrate(c, real, 1, true, out);
  EXPECT_EQ(resumed.table.size(), 2u);
  EXPECT_EQ(resumed.table[0].aggregate, r.table[0].aggregate);
  EXPECT_NE(slurp(out / "run_log.txt").find("resumed: 1"), std::string::npos);

  const fs::path fresh = scratch("calibrate_fresh");
  run_calibrate(c, real, 1, false, fresh);
  EXPECT_EQ(slurp(fresh / "scores.csv"), slurp(out / "scores.csv"));
}
