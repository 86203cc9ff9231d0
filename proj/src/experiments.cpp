#include "hetmarket/experiments.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "hetmarket/csv.hpp"

namespace hetmarket {

namespace {

constexpr std::uint64_t kSimulateStream = 40;
constexpr std::uint64_t kEvaluateStream = 41;
constexpr std::uint64_t kAblateTrainStream = 50;
constexpr std::uint64_t kAblateTrialStream = 51;
constexpr std::uint64_t kProbeStream = 60;

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

const char* trait_name(TraitKind t) {
  switch (t) {
    case TraitKind::Sigma:
      return "sigma";
    case TraitKind::Alpha:
      return "alpha";
    case TraitKind::Gamma:
      break;
  }
  return "gamma";
}

double wealth(const AgentState& s, double mid) {
  return s.cash + static_cast<double>(s.position) * mid;
}

void write_prices_csv(std::ostream& out, const Simulation& sim) {
  CsvWriter w(out);
  w.header({"step", "mid_price", "fundamental_price"});
  const auto& mids = sim.mid_prices();
  const auto& fund = sim.fundamental_prices();
  for (std::size_t t = 0; t < mids.size(); ++t) {
    w.field(static_cast<std::int64_t>(t)).field(mids[t]).field(fund[t]);
    w.end_row();
  }
}

void write_agents_csv(std::ostream& out, const Simulation& sim) {
  CsvWriter w(out);
  w.header({"agent_id", "sigma", "alpha", "gamma", "initial_position", "initial_cash",
            "final_position", "final_cash", "initial_wealth", "final_wealth", "log_return",
            "orders", "discounted_utility"});
  const double mid0 = sim.mid_prices().front();
  const double mid1 = sim.mid_prices().back();
  for (const AgentRecord& a : sim.agents()) {
    const double w0 = wealth(a.initial, mid0), w1 = wealth(a.state, mid1);
    const double lr = (w0 > 0.0 && w1 > 0.0) ? std::log(w1 / w0) : std::nan("");
    w.field(static_cast<std::int64_t>(a.id))
        .field(a.traits.sigma)
        .field(a.traits.alpha)
        .field(a.traits.gamma)
        .field(a.initial.position)
        .field(a.initial.cash)
        .field(a.state.position)
        .field(a.state.cash)
        .field(w0)
        .field(w1)
        .field(lr)
        .field(a.state.order_count)
        .field(a.discounted_utility);
    w.end_row();
  }
}

}  // namespace

std::pair<double, double> mean_and_std(const std::vector<double>& values) {
  if (values.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

TrainingResult run_train(const ExperimentConfig& config, std::uint64_t seed, const fs::path& out) {
  TrainingResult result = train(config, seed);
  fs::create_directories(out);
  save_checkpoint((out / "checkpoint.bin").string(), result.params, result.normalizer,
                  config_hash(config));
  {
    std::ofstream log = open_output(out / "training_log.csv");
    write_training_log(log, result.log);
  }
  write_text(out / "config.json", config_to_json(config) + "\n");
  std::ostringstream run;
  run << "command: train\n"
      << "seed: " << seed << "\n"
      << "config_hash: " << hash_hex(config_hash(config)) << "\n"
      << "episodes: " << result.episodes << "\n"
      << "updates: " << result.log.size() << "\n"
      << "stop_reason: " << result.stop_reason << "\n";
  if (result.log.size() >= 3) {
    std::vector<double> it, r;
    for (const TrainingLogRow& row : result.log) {
      it.push_back(row.iteration);
      r.push_back(row.stats.mean_reward);
    }
    run << "reward_trend_spearman: " << format_double(spearman_correlation(it, r)) << "\n";
  }
  write_text(out / "run_log.txt", run.str());
  return result;
}

std::uint64_t simulation_trial_seed(std::uint64_t seed, int trial) {
  return derive_seed(seed, kSimulateStream, static_cast<std::uint64_t>(trial));
}

Simulation run_episode(const ExperimentConfig& config, const Checkpoint* checkpoint,
                       std::uint64_t seed, AblationSpec ablation, SimulationHooks hooks) {
  Simulation sim(config, seed, ablation);
  ObservationNormalizer frozen;
  if (checkpoint) {
    check_compatible(*checkpoint, config);
    frozen = checkpoint->normalizer;
    PolicyRuntime runtime;
    runtime.params = &checkpoint->params;
    runtime.normalizer = &frozen;
    runtime.normalize = config.learning.normalize_observations;
    sim.set_policy(runtime);
  } else if (config.population.agent_type == "ours") {
    throw std::invalid_argument("a checkpoint is required for the learned population");
  }
  sim.set_hooks(std::move(hooks));
  sim.run();
  sim.set_policy({});
  sim.set_hooks({});
  return sim;
}

void run_simulate(const ExperimentConfig& config, const Checkpoint* checkpoint,
                  std::uint64_t seed, int trials, const fs::path& out) {
  if (trials < 0) throw std::invalid_argument("trials must be >= 0");
  for (int k = 0; k < trials; ++k) {
    std::ostringstream rewards;
    CsvWriter rw(rewards);
    rw.header({"agent_id", "sigma", "alpha", "gamma", "step", "reward", "utility", "position",
               "cash"});
    SimulationHooks hooks;
    hooks.on_order = [&rw](const AgentRecord& a, const OrderEvent& ev) {
      rw.field(static_cast<std::int64_t>(a.id))
          .field(a.traits.sigma)
          .field(a.traits.alpha)
          .field(a.traits.gamma)
          .field(ev.step)
          .field(ev.reward.total)
          .field(ev.reward.utility)
          .field(a.state.position)
          .field(a.state.cash);
      rw.end_row();
    };
    const Simulation sim =
        run_episode(config, checkpoint, simulation_trial_seed(seed, k), {}, std::move(hooks));

    const fs::path dir = out / ("trial_" + std::to_string(k));
    fs::create_directories(dir);
    {
      std::ofstream f = open_output(dir / "prices.csv");
      write_prices_csv(f, sim);
    }
    {
      std::ofstream f = open_output(dir / "trades.csv");
      write_trades_csv(f, sim.trades());
    }
    {
      std::ofstream f = open_output(dir / "agents.csv");
      write_agents_csv(f, sim);
    }
    write_text(dir / "rewards.csv", rewards.str());
    {
      std::ofstream f = open_output(dir / "book.csv");
      write_book_snapshot_csv(f, sim.book());
    }
    {
      std::ofstream f = open_output(dir / "bars.csv");
      write_bars_csv(f, make_bars(sim.mid_prices(), sim.trades(), config.evaluation.steps_per_bar,
                                  config.evaluation.bars_per_series));
    }
  }
}

ReturnSeries bars_from_simulation_csv(const std::string& prices_path,
                                      const std::optional<std::string>& trades_path,
                                      const EvaluationConfig& config) {
  const CsvTable prices = read_csv_file(prices_path);
  const std::size_t step_col = prices.column("step"), mid_col = prices.column("mid_price");
  std::vector<double> mids(prices.rows.size());
  for (std::size_t i = 0; i < prices.rows.size(); ++i) {
    const std::int64_t step = prices.integer(i, step_col);
    if (step != static_cast<std::int64_t>(i))
      throw CsvError(prices_path + ":" + std::to_string(prices.line_numbers[i]) +
                     ": steps must be 0,1,2,... in order");
    mids[i] = prices.number(i, mid_col);
    if (!(mids[i] > 0.0) || !std::isfinite(mids[i]))
      throw CsvError(prices_path + ":" + std::to_string(prices.line_numbers[i]) +
                     ": mid_price must be positive and finite");
  }
  std::vector<Trade> trades;
  if (trades_path) {
    const CsvTable t = read_csv_file(*trades_path);
    const std::size_t s = t.column("step"), p = t.column("price"), v = t.column("volume");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      Trade tr;
      tr.step = t.integer(i, s);
      tr.price = t.number(i, p);
      tr.volume = t.integer(i, v);
      if (tr.volume <= 0)
        throw CsvError(*trades_path + ":" + std::to_string(t.line_numbers[i]) +
                       ": volume must be positive");
      trades.push_back(tr);
    }
  }
  ReturnSeries bars = make_bars(mids, trades, config.steps_per_bar, config.bars_per_series);
  if (!trades_path) bars.volumes.clear();
  return bars;
}

EvaluationResult run_evaluate(const ExperimentConfig& config, const ReturnSeries& bars,
                              const std::optional<ReturnSeries>& real, std::uint64_t seed,
                              const fs::path& out) {
  EvaluationResult result;
  const ReturnSeries standardized = standardize(bars);
  result.report = stylized_report(standardized, config.evaluation);
  const EvaluationConfig& ec = config.evaluation;
  if (real) {
    const std::uint64_t s = derive_seed(seed, kEvaluateStream);
    // One subsampling seed for both sides, so identical data scores zero.
    const CloudSet syn = build_clouds(standardized, ec, s);
    const CloudSet ref = build_clouds(standardize(*real), ec, s);
    result.ot = cloud_distances(syn, ref);
    result.aggregate = aggregate_ot(*result.ot, ec.weight_return, ec.weight_tail, ec.weight_acorr);
  }
  fs::create_directories(out);
  {
    std::ofstream f = open_output(out / "report.csv");
    write_report(f, result.report);
  }
  if (result.ot) {
    std::ofstream f = open_output(out / "ot.csv");
    CsvWriter w(f);
    w.header({"OT_r", "OT_t", "OT_as", "OT_bar"});
    w.field(result.ot->ret).field(result.ot->tail).field(result.ot->acorr).field(result.aggregate);
    w.end_row();
  }
  std::ostringstream run;
  run << "command: evaluate\n"
      << "seed: " << seed << "\n"
      << "days: " << bars.returns.size() << "\n"
      << "bars: " << bars.total() << "\n";
  if (!result.report.acorr_note.empty()) run << "acorr_note: " << result.report.acorr_note << "\n";
  if (!result.report.vv_note.empty()) run << "vv_note: " << result.report.vv_note << "\n";
  write_text(out / "run_log.txt", run.str());
  return result;
}

CalibrationResult run_calibrate(const ExperimentConfig& config, const ReturnSeries& real,
                                std::uint64_t seed, bool resume, const fs::path& out,
                                PipelineOptions pipeline) {
  const std::vector<Candidate> grid = calibration_grid(config);
  const EvaluationConfig& ec = config.evaluation;
  const CloudSet real_clouds = build_clouds(standardize(real), ec, derive_seed(seed, kEvaluateStream));

  fs::create_directories(out);
  const fs::path scores_path = out / "scores.csv";
  CalibrationOptions options;
  options.trials = config.calibration.trials;
  options.threads = config.calibration.threads;
  options.weight_return = ec.weight_return;
  options.weight_tail = ec.weight_tail;
  options.weight_acorr = ec.weight_acorr;
  if (resume && fs::exists(scores_path)) options.completed = read_score_table(scores_path.string());

  // Rows are appended as they finish so an interrupted sweep can resume;
  // the table is rewritten in candidate order at the end.
  {
    std::ofstream progress = open_output(scores_path);
    write_score_table(progress, options.completed);
    progress.flush();
    options.on_score = [&progress](const CandidateScore& s) {
      write_score_row(progress, s);
      progress.flush();
    };
    const CalibrationResult result =
        calibrate(grid, make_pipeline_evaluator(config, seed, real_clouds, pipeline), options);
    progress.close();

    {
      std::ofstream f = open_output(scores_path);
      write_score_table(f, result.table);
    }
    {
      std::ofstream f = open_output(out / "failures.csv");
      CsvWriter w(f);
      w.header({"candidate_id", "lambda_sigma", "lambda_alpha", "lambda_gamma", "error"});
      for (const CandidateFailure& e : result.failures) {
        w.field(e.candidate.id)
            .field(e.candidate.lambda_sigma)
            .field(e.candidate.lambda_alpha)
            .field(e.candidate.lambda_gamma)
            .field(e.error);
        w.end_row();
      }
    }
    std::ostringstream run;
    run << "command: calibrate\n"
        << "seed: " << seed << "\n"
        << "candidates: " << grid.size() << "\n"
        << "resumed: " << options.completed.size() << "\n"
        << "scored: " << result.table.size() << "\n"
        << "failed: " << result.failures.size() << "\n";
    if (result.best) {
      const Candidate& b = result.best->candidate;
      run << "best_candidate: " << b.id << "\n"
          << "best_lambda_sigma: " << format_double(b.lambda_sigma) << "\n"
          << "best_lambda_alpha: " << format_double(b.lambda_alpha) << "\n"
          << "best_lambda_gamma: " << format_double(b.lambda_gamma) << "\n"
          << "best_OT_bar: " << format_double(result.best->aggregate) << "\n";
      write_text(out / "best_config.json", config_to_json(apply_candidate(config, b)) + "\n");
    }
    write_text(out / "run_log.txt", run.str());
    return result;
  }
}

AblationResult run_ablate(const ExperimentConfig& config, const Checkpoint* checkpoint,
                          const AblationSpec& spec, std::uint64_t seed, int trials,
                          const fs::path& out) {
  if (!spec.active()) throw std::invalid_argument("ablation needs a trait and a mode");
  if (trials < 1) throw std::invalid_argument("ablation needs at least one trial");
  std::optional<Checkpoint> trained;
  if (!checkpoint) {
    TrainingResult r = train(config, derive_seed(seed, kAblateTrainStream));
    trained = Checkpoint{std::move(r.params), r.normalizer, config_hash(config)};
    checkpoint = &*trained;
  }

  AblationResult result;
  result.spec = spec;
  std::vector<double> base, abl;
  for (int k = 0; k < trials; ++k) {
    const std::uint64_t s = derive_seed(seed, kAblateTrialStream, static_cast<std::uint64_t>(k));
    AblationTrial t;
    t.trial = k;
    t.baseline = run_episode(config, checkpoint, s).social_welfare();
    t.ablated = run_episode(config, checkpoint, s, spec).social_welfare();
    base.push_back(t.baseline);
    abl.push_back(t.ablated);
    result.trials.push_back(t);
  }
  std::tie(result.baseline_mean, result.baseline_std) = mean_and_std(base);
  std::tie(result.ablated_mean, result.ablated_std) = mean_and_std(abl);

  fs::create_directories(out);
  {
    std::ofstream f = open_output(out / "welfare.csv");
    CsvWriter w(f);
    w.header({"trial", "variant", "welfare"});
    for (const AblationTrial& t : result.trials) {
      w.field(t.trial).field("none").field(t.baseline);
      w.end_row();
      w.field(t.trial).field(spec.label()).field(t.ablated);
      w.end_row();
    }
  }
  {
    std::ofstream f = open_output(out / "summary.csv");
    CsvWriter w(f);
    w.header({"variant", "mean", "std", "trials"});
    w.field("none").field(result.baseline_mean).field(result.baseline_std).field(trials);
    w.end_row();
    w.field(spec.label()).field(result.ablated_mean).field(result.ablated_std).field(trials);
    w.end_row();
  }
  const TraitPriors& p = config.agent.priors;
  const TraitKind trait = *spec.trait;
  const double prior_mean = trait == TraitKind::Sigma   ? p.sigma_mean
                            : trait == TraitKind::Alpha ? p.alpha_mean
                                                        : p.gamma_mean();
  std::ostringstream run;
  run << "command: ablate\n"
      << "seed: " << seed << "\n"
      << "variant: " << spec.label() << "\n"
      << "policy: " << (trained ? "trained for this run" : "checkpoint") << "\n"
      << "trials: " << trials << "\n"
      << "trait_draws: resampled per trial from trial-indexed seeds, shared by both variants\n";
  if (spec.homo()) {
    run << "trait_sampling_modified: true\n"
        << "observation_input_modified: false\n"
        << "fixed_value: " << format_double(prior_mean) << "\n";
  } else {
    run << "trait_sampling_modified: false\n"
        << "observation_input_modified: true\n"
        << "masked_component: " << observation_names()[trait_index(trait)] << "\n"
        << "welfare_discount: each agent's own " << trait_name(trait) << "\n";
  }
  write_text(out / "run_log.txt", run.str());
  return result;
}

std::size_t run_probe(const ExperimentConfig& config, const Checkpoint& checkpoint,
                      std::uint64_t seed, const fs::path& out) {
  std::vector<Observation> observations;
  std::vector<Eigen::VectorXd> inputs;
  SimulationHooks hooks;
  hooks.on_policy_query = [&](const Observation& obs, const Eigen::VectorXd& input) {
    observations.push_back(obs);
    inputs.push_back(input);
  };
  run_episode(config, &checkpoint, derive_seed(seed, kProbeStream), {}, std::move(hooks));

  Eigen::MatrixXd batch(static_cast<Eigen::Index>(inputs.size()),
                        static_cast<Eigen::Index>(kObservationSize));
  for (std::size_t i = 0; i < inputs.size(); ++i)
    batch.row(static_cast<Eigen::Index>(i)) = inputs[i].transpose();
  const Eigen::MatrixXd h = inputs.empty() ? Eigen::MatrixXd(0, checkpoint.params.hidden_width)
                                           : hidden_activations(checkpoint.params, batch, 2);

  fs::create_directories(out);
  std::ofstream f = open_output(out / "activations.csv");
  CsvWriter w(f);
  std::vector<std::string> header;
  for (int k = 0; k < checkpoint.params.hidden_width; ++k) header.push_back("h" + std::to_string(k));
  for (const char* name : observation_names()) header.emplace_back(name);
  w.header(header);
  for (std::size_t i = 0; i < observations.size(); ++i) {
    for (Eigen::Index k = 0; k < h.cols(); ++k) w.field(h(static_cast<Eigen::Index>(i), k));
    for (double x : observations[i]) w.field(x);
    w.end_row();
  }
  return observations.size();
}

}  // namespace hetmarket
