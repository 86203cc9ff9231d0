#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <vector>

#include "hetmarket/checkpoint.hpp"
#include "hetmarket/config.hpp"
#include "hetmarket/experiments.hpp"
#include "hetmarket/point_cloud.hpp"
#include "hetmarket/stylized_facts.hpp"
#include "hetmarket/trainer.hpp"
#include "hetmarket/transport.hpp"

namespace py = pybind11;
using namespace hetmarket;

namespace {

using Days = std::vector<std::vector<double>>;

py::dict simulate(const ExperimentConfig& config, std::optional<std::uint64_t> seed,
                  const Checkpoint* checkpoint) {
  Simulation sim = [&] {
    py::gil_scoped_release release;
    return run_episode(config, checkpoint, seed.value_or(config.seed));
  }();
  const std::vector<Trade>& trades = sim.trades();
  Eigen::MatrixXd t(static_cast<Eigen::Index>(trades.size()), 5);
  for (std::size_t i = 0; i < trades.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    t(r, 0) = static_cast<double>(trades[i].step);
    t(r, 1) = trades[i].price;
    t(r, 2) = static_cast<double>(trades[i].volume);
    t(r, 3) = static_cast<double>(trades[i].buyer_id);
    t(r, 4) = static_cast<double>(trades[i].seller_id);
  }
  py::dict out;
  out["mid_prices"] = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
      sim.mid_prices().data(), static_cast<Eigen::Index>(sim.mid_prices().size())));
  out["fundamental_prices"] = Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
      sim.fundamental_prices().data(), static_cast<Eigen::Index>(sim.fundamental_prices().size())));
  out["trades"] = t;
  out["social_welfare"] = sim.social_welfare();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Heterogeneous-agent limit order book market simulator";

  py::class_<ExperimentConfig>(m, "Config")
      .def_static("from_json", [](const std::string& text) { return parse_config(text); })
      .def_static("load", &load_config)
      .def("to_json", &config_to_json)
      .def("hash", &config_hash)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def("__eq__", [](const ExperimentConfig& a, const ExperimentConfig& b) { return a == b; });

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("config_hash", &Checkpoint::config_hash)
      .def_property_readonly("hidden_width", [](const Checkpoint& c) { return c.params.hidden_width; })
      .def("save", [](const Checkpoint& c, const std::string& path) {
        save_checkpoint(path, c.params, c.normalizer, c.config_hash);
      });
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "train",
      [](const ExperimentConfig& config, std::optional<std::uint64_t> seed) {
        TrainingResult r = [&] {
          py::gil_scoped_release release;
          return train(config, seed.value_or(config.seed));
        }();
        Eigen::MatrixXd log(static_cast<Eigen::Index>(r.log.size()), 5);
        for (std::size_t i = 0; i < r.log.size(); ++i) {
          const auto k = static_cast<Eigen::Index>(i);
          log(k, 0) = r.log[i].iteration;
          log(k, 1) = r.log[i].stats.mean_reward;
          log(k, 2) = r.log[i].stats.actor_loss;
          log(k, 3) = r.log[i].stats.critic_loss;
          log(k, 4) = r.log[i].stats.entropy;
        }
        Checkpoint ck{std::move(r.params), r.normalizer, config_hash(config)};
        return py::make_tuple(std::move(ck), log);
      },
      py::arg("config"), py::arg("seed") = py::none(),
      "Returns (checkpoint, log) with log columns iteration, mean_reward, actor_loss, "
      "critic_loss, entropy.");

  m.def("simulate", &simulate, py::arg("config"), py::arg("seed") = py::none(),
        py::arg("checkpoint") = nullptr,
        "One frozen-policy episode: mid_prices, fundamental_prices, trades "
        "(step, price, volume, buyer, seller) and social_welfare.");

  m.def(
      "make_bars",
      [](const std::vector<double>& mids, int steps_per_bar, int bars_per_series) {
        return make_bars(mids, {}, steps_per_bar, bars_per_series).returns;
      },
      py::arg("mid_prices"), py::arg("steps_per_bar"), py::arg("bars_per_series"));

  m.def("excess_kurtosis", [](const std::vector<double>& x) { return excess_kurtosis(x); });
  m.def("hill_tail_exponent",
        [](const std::vector<double>& x, std::size_t k) { return hill_tail_exponent(x, k); },
        py::arg("abs_returns"), py::arg("k"));
  m.def("spearman_correlation", [](const std::vector<double>& x, const std::vector<double>& y) {
    return spearman_correlation(x, y);
  });
  m.def("volume_volatility_corr", [](const std::vector<double>& v, const std::vector<double>& r) {
    return volume_volatility_corr(v, r);
  });
  m.def(
      "acorr_coefficient",
      [](const Days& series, const std::vector<int>& lags) { return acorr_coefficient(series, lags).zeta; },
      py::arg("series"), py::arg("lags"));

  m.def(
      "build_tail_cloud",
      [](const Days& standardized, std::size_t k, bool descending) {
        ReturnSeries s;
        s.returns = standardized;
        return Eigen::VectorXd(build_tail_cloud(s, k, descending).points.col(0));
      },
      py::arg("standardized"), py::arg("k"), py::arg("descending_indexing") = false);

  m.def("ot_distance", &ot_distance, py::arg("a"), py::arg("b"),
        "Squared-Euclidean OT distance between uniform point clouds (rows are points).");
  m.def(
      "solve_transport",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        const TransportResult r = solve_transport(a, b);
        return py::make_tuple(r.cost, r.plan);
      },
      py::arg("a"), py::arg("b"));
}
