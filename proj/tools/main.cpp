#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "hetmarket/csv.hpp"
#include "hetmarket/experiments.hpp"

using namespace hetmarket;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--out", c.out, "output directory");
}

ExperimentConfig load(const Common& c, std::uint64_t& seed) {
  ExperimentConfig config = load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  seed = config.seed;
  return config;
}

std::optional<Checkpoint> load_checkpoint_for(const std::string& path, const ExperimentConfig& config) {
  if (path.empty()) return std::nullopt;
  Checkpoint ck = load_checkpoint(path);
  check_compatible(ck, config);
  if (ck.config_hash != config_hash(config))
    std::cerr << "note: checkpoint was trained under a different config\n";
  return ck;
}

void print_report(const EvaluationResult& r) {
  auto flag = [](bool b) { return b ? "pass" : "fail"; };
  std::cout << "kurtosis      " << format_double(r.report.kurtosis) << "  " << flag(r.report.kurtosis_pass) << "\n"
            << "tail_exponent " << format_double(r.report.tail_exponent) << "  " << flag(r.report.tail_pass) << "\n"
            << "acorr         " << format_double(r.report.acorr) << "  " << flag(r.report.acorr_pass) << "\n"
            << "vv_corr       " << format_double(r.report.vv_corr) << "  " << flag(r.report.vv_pass) << "\n";
  if (r.ot)
    std::cout << "OT_r " << format_double(r.ot->ret) << "  OT_t " << format_double(r.ot->tail)
              << "  OT_as " << format_double(r.ot->acorr) << "  OT_bar " << format_double(r.aggregate)
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous-agent limit order book market simulator"};
  app.require_subcommand(1);

  Common train_c;
  auto* train_cmd = app.add_subcommand("train", "train the shared policy");
  add_common(train_cmd, train_c);

  Common sim_c;
  std::string sim_ckpt;
  int sim_trials = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "run evaluation episodes with a frozen policy");
  add_common(sim_cmd, sim_c);
  sim_cmd->add_option("--checkpoint", sim_ckpt, "trained checkpoint (learned population)");
  sim_cmd->add_option("--trials", sim_trials, "number of episodes")->check(CLI::NonNegativeNumber);

  Common eval_c;
  std::string eval_bars, eval_prices, eval_trades, eval_real;
  auto* eval_cmd = app.add_subcommand("evaluate", "stylized facts and OT distances");
  add_common(eval_cmd, eval_c);
  auto* bars_opt = eval_cmd->add_option("--bars", eval_bars, "bars CSV (day,bar,log_return[,volume])");
  auto* prices_opt = eval_cmd->add_option("--prices", eval_prices, "prices.csv from simulate");
  eval_cmd->add_option("--trades", eval_trades, "trades.csv from simulate")->needs(prices_opt);
  eval_cmd->add_option("--real", eval_real, "real-data bars CSV");
  bars_opt->excludes(prices_opt);

  Common cal_c;
  std::string cal_real;
  std::optional<int> cal_trials;
  bool cal_resume = false;
  auto* cal_cmd = app.add_subcommand("calibrate", "grid search over trait priors");
  add_common(cal_cmd, cal_c);
  cal_cmd->add_option("--real", cal_real, "real-data bars CSV")->required();
  cal_cmd->add_option("--trials", cal_trials, "trials per candidate")->check(CLI::PositiveNumber);
  cal_cmd->add_flag("--resume", cal_resume, "keep rows already in scores.csv");

  Common abl_c;
  std::string abl_ckpt, abl_trait, abl_mode;
  int abl_trials = 5;
  auto* abl_cmd = app.add_subcommand("ablate", "social welfare with one trait homogenized or masked");
  add_common(abl_cmd, abl_c);
  abl_cmd->add_option("--checkpoint", abl_ckpt, "trained checkpoint; trains one if omitted");
  abl_cmd->add_option("--trait", abl_trait, "sigma, alpha or gamma")->required();
  abl_cmd->add_option("--mode", abl_mode, "homo or masked")->required();
  abl_cmd->add_option("--trials", abl_trials, "number of trials")->check(CLI::PositiveNumber);

  Common probe_c;
  std::string probe_ckpt;
  auto* probe_cmd = app.add_subcommand("probe", "export second-hidden-layer activations");
  add_common(probe_cmd, probe_c);
  probe_cmd->add_option("--checkpoint", probe_ckpt, "trained checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    std::uint64_t seed = 0;
    if (*train_cmd) {
      const ExperimentConfig config = load(train_c, seed);
      const TrainingResult r = run_train(config, seed, train_c.out);
      std::cout << "updates " << r.log.size() << ", episodes " << r.episodes << ", stop "
                << r.stop_reason << "\n";
    } else if (*sim_cmd) {
      const ExperimentConfig config = load(sim_c, seed);
      const auto ck = load_checkpoint_for(sim_ckpt, config);
      run_simulate(config, ck ? &*ck : nullptr, seed, sim_trials, sim_c.out);
    } else if (*eval_cmd) {
      const ExperimentConfig config = load(eval_c, seed);
      ReturnSeries bars;
      if (!eval_bars.empty())
        bars = read_return_csv(eval_bars);
      else if (!eval_prices.empty())
        bars = bars_from_simulation_csv(
            eval_prices, eval_trades.empty() ? std::nullopt : std::optional(eval_trades),
            config.evaluation);
      else
        throw std::invalid_argument("evaluate needs --bars or --prices");
      std::optional<ReturnSeries> real;
      if (!eval_real.empty()) real = read_return_csv(eval_real);
      print_report(run_evaluate(config, bars, real, seed, eval_c.out));
    } else if (*cal_cmd) {
      ExperimentConfig config = load(cal_c, seed);
      if (cal_trials) config.calibration.trials = *cal_trials;
      const CalibrationResult r =
          run_calibrate(config, read_return_csv(cal_real), seed, cal_resume, cal_c.out);
      for (const CandidateFailure& f : r.failures)
        std::cerr << "candidate " << f.candidate.id << " failed: " << f.error << "\n";
      if (r.best)
        std::cout << "best candidate " << r.best->candidate.id << ": lambda_sigma "
                  << format_double(r.best->candidate.lambda_sigma) << ", lambda_alpha "
                  << format_double(r.best->candidate.lambda_alpha) << ", lambda_gamma "
                  << format_double(r.best->candidate.lambda_gamma) << ", OT_bar "
                  << format_double(r.best->aggregate) << "\n";
      else
        std::cout << "no candidate completed\n";
    } else if (*abl_cmd) {
      const ExperimentConfig config = load(abl_c, seed);
      const AblationSpec spec = AblationSpec::parse(abl_trait, abl_mode);
      const auto ck = load_checkpoint_for(abl_ckpt, config);
      const AblationResult r = run_ablate(config, ck ? &*ck : nullptr, spec, seed, abl_trials, abl_c.out);
      std::cout << "none " << format_double(r.baseline_mean) << " (+-" << format_double(r.baseline_std)
                << ")\n"
                << spec.label() << " " << format_double(r.ablated_mean) << " (+-"
                << format_double(r.ablated_std) << ")\n";
    } else if (*probe_cmd) {
      const ExperimentConfig config = load(probe_c, seed);
      const auto ck = load_checkpoint_for(probe_ckpt, config);
      std::cout << run_probe(config, *ck, seed, probe_c.out) << " rows\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
