#include "hetmarket/calibration.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "hetmarket/csv.hpp"
#include "hetmarket/simulation.hpp"
#include "hetmarket/trainer.hpp"

namespace hetmarket {

namespace {

constexpr std::uint64_t kTrainStream = 30;
constexpr std::uint64_t kSimulateStream = 31;
constexpr std::uint64_t kCloudStream = 32;

std::vector<double> axis_or(const std::vector<double>& axis, double fallback) {
  return axis.empty() ? std::vector<double>{fallback} : axis;
}

bool same_point(const Candidate& a, const Candidate& b) {
  return a.lambda_sigma == b.lambda_sigma && a.lambda_alpha == b.lambda_alpha &&
         a.lambda_gamma == b.lambda_gamma;
}

}  // namespace

std::vector<Candidate> calibration_grid(const ExperimentConfig& config) {
  const TraitPriors& p = config.agent.priors;
  const CalibrationConfig& c = config.calibration;
  std::vector<Candidate> grid;
  for (double s : axis_or(c.sigma_std, p.sigma_std))
    for (double a : axis_or(c.alpha_std, p.alpha_std))
      for (double g : axis_or(c.gamma_min, p.gamma_min))
        grid.push_back({static_cast<int>(grid.size()), s, a, g});
  return grid;
}

ExperimentConfig apply_candidate(ExperimentConfig config, const Candidate& candidate) {
  config.agent.priors.sigma_std = candidate.lambda_sigma;
  config.agent.priors.alpha_std = candidate.lambda_alpha;
  config.agent.priors.gamma_min = candidate.lambda_gamma;
  config.validate();
  return config;
}

CalibrationResult calibrate(const std::vector<Candidate>& grid, const TrialEvaluator& evaluate,
                            const CalibrationOptions& options) {
  if (grid.empty()) throw std::invalid_argument("calibration grid is empty");
  if (options.trials < 1) throw std::invalid_argument("calibration needs at least one trial");
  if (options.weight_return < 0 || options.weight_tail < 0 || options.weight_acorr < 0)
    throw std::invalid_argument("OT weights must be nonnegative");

  std::map<int, CandidateScore> done;
  for (const CandidateScore& s : options.completed) {
    auto it = std::find_if(grid.begin(), grid.end(),
                           [&](const Candidate& c) { return c.id == s.candidate.id; });
    if (it == grid.end() || !same_point(*it, s.candidate))
      throw std::invalid_argument("resumed score table does not match the grid at candidate " +
                                  std::to_string(s.candidate.id));
    done[s.candidate.id] = s;
  }
  std::vector<Candidate> pending;
  for (const Candidate& c : grid)
    if (!done.count(c.id)) pending.push_back(c);

  CalibrationResult result;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= pending.size()) return;
      const Candidate& c = pending[k];
      try {
        CandidateScore score;
        score.candidate = c;
        for (int trial = 0; trial < options.trials; ++trial) {
          const OtScores s = evaluate(c, trial);
          score.ot.ret += s.ret;
          score.ot.tail += s.tail;
          score.ot.acorr += s.acorr;
        }
        const double n = options.trials;
        score.ot.ret /= n;
        score.ot.tail /= n;
        score.ot.acorr /= n;
        score.aggregate = aggregate_ot(score.ot, options.weight_return, options.weight_tail,
                                       options.weight_acorr);
        std::lock_guard<std::mutex> lock(mutex);
        done[c.id] = score;
        if (options.on_score) options.on_score(score);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mutex);
        result.failures.push_back({c, e.what()});
        if (options.on_failure) options.on_failure(result.failures.back());
      }
    }
  };

  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(std::max<std::size_t>(1, pending.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (auto& [id, score] : done) result.table.push_back(score);
  std::sort(result.failures.begin(), result.failures.end(),
            [](const CandidateFailure& a, const CandidateFailure& b) {
              return a.candidate.id < b.candidate.id;
            });
  for (const CandidateScore& s : result.table)
    if (!result.best || s.aggregate < result.best->aggregate) result.best = s;
  return result;
}

ReturnSeries simulate_returns(const ExperimentConfig& config, const PolicyParams* params,
                              const ObservationNormalizer* normalizer, std::uint64_t seed,
                              int episodes) {
  ReturnSeries all;
  ObservationNormalizer frozen = normalizer ? *normalizer : ObservationNormalizer();
  for (int ep = 0; ep < episodes; ++ep) {
    Simulation sim(config, derive_seed(seed, 0, static_cast<std::uint64_t>(ep)), {}, ep);
    PolicyRuntime runtime;
    runtime.params = params;
    runtime.normalizer = &frozen;
    runtime.normalize = config.learning.normalize_observations && normalizer != nullptr;
    sim.set_policy(runtime);
    sim.run();
    append(all, make_bars(sim.mid_prices(), sim.trades(), config.evaluation.steps_per_bar,
                          config.evaluation.bars_per_series));
  }
  return all;
}

TrialEvaluator make_pipeline_evaluator(const ExperimentConfig& base, std::uint64_t seed,
                                       CloudSet real, PipelineOptions options) {
  return [base, seed, real = std::move(real), options](const Candidate& c, int trial) {
    const ExperimentConfig config = apply_candidate(base, c);
    const auto t = static_cast<std::uint64_t>(trial);
    std::optional<TrainingResult> trained;
    const PolicyParams* params = options.shared_params;
    const ObservationNormalizer* normalizer = options.shared_normalizer;
    if (!params && config.population.agent_type == "ours") {
      trained = train(config, derive_seed(seed, kTrainStream, t));
      params = &trained->params;
      normalizer = &trained->normalizer;
    }
    const ReturnSeries bars =
        simulate_returns(config, params, normalizer, derive_seed(seed, kSimulateStream, t),
                         config.calibration.simulation_episodes);
    const CloudSet synthetic =
        build_clouds(standardize(bars), config.evaluation, derive_seed(seed, kCloudStream, t));
    return cloud_distances(synthetic, real);
  };
}

void write_score_header(std::ostream& out) {
  CsvWriter w(out);
  w.header({"candidate_id", "lambda_sigma", "lambda_alpha", "lambda_gamma", "OT_r", "OT_t",
            "OT_as", "OT_bar"});
}

void write_score_row(std::ostream& out, const CandidateScore& s) {
  CsvWriter w(out);
  w.field(s.candidate.id);
  w.field(s.candidate.lambda_sigma);
  w.field(s.candidate.lambda_alpha);
  w.field(s.candidate.lambda_gamma);
  w.field(s.ot.ret);
  w.field(s.ot.tail);
  w.field(s.ot.acorr);
  w.field(s.aggregate);
  w.end_row();
}

void write_score_table(std::ostream& out, const std::vector<CandidateScore>& table) {
  write_score_header(out);
  for (const CandidateScore& s : table) write_score_row(out, s);
}

std::vector<CandidateScore> read_score_table(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  const std::size_t id = t.column("candidate_id"), ls = t.column("lambda_sigma"),
                    la = t.column("lambda_alpha"), lg = t.column("lambda_gamma"),
                    r = t.column("OT_r"), tl = t.column("OT_t"), as = t.column("OT_as"),
                    bar = t.column("OT_bar");
  std::vector<CandidateScore> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CandidateScore s;
    s.candidate.id = static_cast<int>(t.integer(i, id));
    s.candidate.lambda_sigma = t.number(i, ls);
    s.candidate.lambda_alpha = t.number(i, la);
    s.candidate.lambda_gamma = t.number(i, lg);
    s.ot.ret = t.number(i, r);
    s.ot.tail = t.number(i, tl);
    s.ot.acorr = t.number(i, as);
    s.aggregate = t.number(i, bar);
    out.push_back(s);
  }
  return out;
}

}  // namespace hetmarket
