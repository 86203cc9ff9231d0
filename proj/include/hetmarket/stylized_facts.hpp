#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hetmarket/order_book.hpp"

namespace hetmarket {

struct EvaluationConfig;

/// Fourth standardized central moment minus 3 (population moments).
double excess_kurtosis(std::span<const double> samples);

/// Hill estimator over the `k` largest values of `abs_returns`, referenced to
/// the (k+1)-th largest.
double hill_tail_exponent(std::span<const double> abs_returns, std::size_t k);

double pearson_correlation(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of ranks; ties share their average rank.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

struct AcorrFit {
  double zeta = 0.0;  // minus the log-log slope
  std::vector<int> lags;
  std::vector<double> correlations;
};

/// Power-law decay exponent of a correlation profile: OLS of log corr on
/// log lag. Lags with nonpositive correlation are dropped; fewer than three
/// usable lags is an error.
AcorrFit acorr_from_profile(std::span<const int> lags, std::span<const double> correlations);

/// Correlation of |r_t| and |r_{t+lag}| pooled over pairs inside each series.
double abs_return_autocorrelation(const std::vector<std::vector<double>>& series, int lag);

/// Standard errors a lag correlation must exceed under the white-noise null
/// (1/sqrt(pairs)) to enter the power-law fit.
inline constexpr double kAcorrSignificance = 3.0;

/// Long-memory coefficient of absolute returns. Lags beyond half the shortest
/// series, or without significant positive correlation, are ignored.
AcorrFit acorr_coefficient(const std::vector<std::vector<double>>& series,
                           std::span<const int> lags);

double volume_volatility_corr(std::span<const double> volumes, std::span<const double> abs_returns);

/// Per-day bar data. Returns are raw log returns until standardized.
struct ReturnSeries {
  std::vector<std::vector<double>> returns;
  std::vector<std::vector<double>> volumes;  // empty when volumes are unknown

  bool has_volume() const { return !volumes.empty(); }
  std::size_t total() const;
  std::vector<double> pooled() const;
};

/// Aggregates a mid-price path (index = step) and its trades into bars of
/// `steps_per_bar` steps, grouped into days of `bars_per_series` bars.
/// Incomplete trailing days are dropped.
ReturnSeries make_bars(std::span<const double> mid_prices, std::span<const Trade> trades,
                       int steps_per_bar, int bars_per_series);

/// Per-day standardization to zero mean and unit sample standard deviation.
/// Days with zero variance are rejected.
ReturnSeries standardize(const ReturnSeries& raw);

void append(ReturnSeries& into, const ReturnSeries& more);

/// CSV with columns day,bar,log_return and optionally volume.
ReturnSeries read_return_csv(const std::string& path);
void write_bars_csv(std::ostream& out, const ReturnSeries& bars);

struct StylizedReport {
  double kurtosis = 0.0;
  double tail_exponent = 0.0;
  double acorr = 0.0;
  double vv_corr = 0.0;
  bool kurtosis_pass = false;
  bool tail_pass = false;
  bool acorr_pass = false;
  bool vv_pass = false;
  std::string acorr_note;  // set when the regression was rejected
  std::string vv_note;
};

/// All four statistics from standardized series.
StylizedReport stylized_report(const ReturnSeries& standardized, const EvaluationConfig& config);

/// metric,value,pass rows.
void write_report(std::ostream& out, const StylizedReport& report);

}  // namespace hetmarket
