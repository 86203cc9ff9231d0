#include "hetmarket/stylized_facts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "hetmarket/config.hpp"
#include "hetmarket/csv.hpp"

namespace hetmarket {

double excess_kurtosis(std::span<const double> samples) {
  if (samples.size() < 4) throw std::invalid_argument("kurtosis needs at least 4 samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw std::invalid_argument("kurtosis undefined for zero variance");
  return m4 / (m2 * m2) - 3.0;
}

double hill_tail_exponent(std::span<const double> abs_returns, std::size_t k) {
  if (k == 0 || k >= abs_returns.size())
    throw std::invalid_argument("Hill estimator requires 1 <= k < N");
  std::vector<double> v(abs_returns.begin(), abs_returns.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(),
                   std::greater<>());
  const double reference = v[k];
  if (!(reference > 0.0))
    throw std::invalid_argument("Hill estimator requires positive order statistics");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(v[i] / reference);
  if (!(sum > 0.0)) throw std::invalid_argument("Hill estimator undefined for a flat tail");
  return static_cast<double>(k) / sum;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation inputs differ in length");
  if (x.size() < 3) throw std::invalid_argument("correlation needs at least 3 samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw std::invalid_argument("correlation undefined for zero-variance input");
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("correlation inputs differ in length");
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  return pearson_correlation(rx, ry);
}

AcorrFit acorr_from_profile(std::span<const int> lags, std::span<const double> correlations) {
  if (lags.size() != correlations.size())
    throw std::invalid_argument("lag and correlation counts differ");
  AcorrFit fit;
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] < 1) throw std::invalid_argument("lags must be >= 1");
    if (correlations[i] > 0.0 && std::isfinite(correlations[i])) {
      fit.lags.push_back(lags[i]);
      fit.correlations.push_back(correlations[i]);
    }
  }
  if (fit.lags.size() < 3)
    throw std::invalid_argument("fewer than 3 lags with positive correlation");
  const double n = static_cast<double>(fit.lags.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < fit.lags.size(); ++i) {
    mx += std::log(static_cast<double>(fit.lags[i]));
    my += std::log(fit.correlations[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < fit.lags.size(); ++i) {
    const double dx = std::log(static_cast<double>(fit.lags[i])) - mx;
    sxy += dx * (std::log(fit.correlations[i]) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("lags must not all be equal");
  fit.zeta = -sxy / sxx;
  return fit;
}

double abs_return_autocorrelation(const std::vector<std::vector<double>>& series, int lag) {
  if (lag < 1) throw std::invalid_argument("lag must be >= 1");
  std::vector<double> x, y;
  for (const auto& s : series) {
    for (std::size_t t = 0; t + static_cast<std::size_t>(lag) < s.size(); ++t) {
      x.push_back(std::abs(s[t]));
      y.push_back(std::abs(s[t + static_cast<std::size_t>(lag)]));
    }
  }
  return pearson_correlation(x, y);
}

AcorrFit acorr_coefficient(const std::vector<std::vector<double>>& series,
                           std::span<const int> lags) {
  if (series.empty()) throw std::invalid_argument("no series given");
  std::size_t shortest = series.front().size();
  for (const auto& s : series) shortest = std::min(shortest, s.size());
  std::vector<int> used;
  std::vector<double> corr;
  for (int lag : lags) {
    if (lag < 1) throw std::invalid_argument("lags must be >= 1");
    if (static_cast<std::size_t>(lag) * 2 > shortest) continue;
    double c = 0.0;
    try {
      c = abs_return_autocorrelation(series, lag);
    } catch (const std::invalid_argument&) {
      continue;  // zero variance at this lag: treat as unusable
    }
    std::size_t pairs = 0;
    for (const auto& s : series) pairs += s.size() - static_cast<std::size_t>(lag);
    // Keep only lags whose correlation clears the null band of white noise.
    if (c <= kAcorrSignificance / std::sqrt(static_cast<double>(pairs))) continue;
    used.push_back(lag);
    corr.push_back(c);
  }
  return acorr_from_profile(used, corr);
}

double volume_volatility_corr(std::span<const double> volumes, std::span<const double> abs_returns) {
  return pearson_correlation(volumes, abs_returns);
}

std::size_t ReturnSeries::total() const {
  std::size_t n = 0;
  for (const auto& d : returns) n += d.size();
  return n;
}

std::vector<double> ReturnSeries::pooled() const {
  std::vector<double> all;
  all.reserve(total());
  for (const auto& d : returns) all.insert(all.end(), d.begin(), d.end());
  return all;
}

ReturnSeries make_bars(std::span<const double> mid_prices, std::span<const Trade> trades,
                       int steps_per_bar, int bars_per_series) {
  if (steps_per_bar < 1 || bars_per_series < 1)
    throw std::invalid_argument("bar sizes must be >= 1");
  ReturnSeries out;
  if (mid_prices.size() < 2) return out;
  const std::size_t last_step = mid_prices.size() - 1;
  const std::size_t bars = last_step / static_cast<std::size_t>(steps_per_bar);
  const std::size_t days = bars / static_cast<std::size_t>(bars_per_series);

  std::vector<double> volume(bars, 0.0);
  for (const Trade& tr : trades) {
    if (tr.step < 1) continue;
    const auto bar = static_cast<std::size_t>((tr.step - 1) / steps_per_bar);
    if (bar < bars) volume[bar] += static_cast<double>(tr.volume);
  }
  for (std::size_t d = 0; d < days; ++d) {
    std::vector<double> r, v;
    for (int b = 0; b < bars_per_series; ++b) {
      const std::size_t bar = d * static_cast<std::size_t>(bars_per_series) + b;
      const std::size_t start = bar * static_cast<std::size_t>(steps_per_bar);
      const std::size_t end = start + static_cast<std::size_t>(steps_per_bar);
      r.push_back(std::log(mid_prices[end] / mid_prices[start]));
      v.push_back(volume[bar]);
    }
    out.returns.push_back(std::move(r));
    out.volumes.push_back(std::move(v));
  }
  return out;
}

ReturnSeries standardize(const ReturnSeries& raw) {
  ReturnSeries out;
  out.volumes = raw.volumes;
  for (std::size_t d = 0; d < raw.returns.size(); ++d) {
    const auto& day = raw.returns[d];
    if (day.size() < 2) throw std::invalid_argument("each day needs at least 2 returns");
    const double n = static_cast<double>(day.size());
    const double mean = std::accumulate(day.begin(), day.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : day) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0))
      throw std::invalid_argument("day " + std::to_string(d) + " has zero return variance");
    std::vector<double> z;
    z.reserve(day.size());
    for (double x : day) z.push_back((x - mean) / sd);
    out.returns.push_back(std::move(z));
  }
  return out;
}

void append(ReturnSeries& into, const ReturnSeries& more) {
  const bool had = !into.returns.empty();
  if (had && into.has_volume() != more.has_volume() && !more.returns.empty())
    throw std::invalid_argument("cannot mix series with and without volumes");
  into.returns.insert(into.returns.end(), more.returns.begin(), more.returns.end());
  into.volumes.insert(into.volumes.end(), more.volumes.begin(), more.volumes.end());
}

ReturnSeries read_return_csv(const std::string& path) {
  const CsvTable table = read_csv_file(path);
  const std::size_t day_col = table.column("day");
  const std::size_t bar_col = table.column("bar");
  const std::size_t ret_col = table.column("log_return");
  const bool with_volume = table.has_column("volume");
  const std::size_t vol_col = with_volume ? table.column("volume") : 0;

  std::map<std::int64_t, std::map<std::int64_t, std::pair<double, double>>> days;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto day = table.integer(i, day_col);
    const auto bar = table.integer(i, bar_col);
    const double r = table.number(i, ret_col);
    const double v = with_volume ? table.number(i, vol_col) : 0.0;
    if (!std::isfinite(r))
      throw CsvError(path + ":" + std::to_string(table.line_numbers[i]) +
                     ": log_return must be finite");
    if (!days[day].emplace(bar, std::make_pair(r, v)).second)
      throw CsvError(path + ":" + std::to_string(table.line_numbers[i]) + ": duplicate bar " +
                     std::to_string(bar) + " in day " + std::to_string(day));
  }
  ReturnSeries out;
  for (const auto& [day, bars] : days) {
    std::vector<double> r, v;
    for (const auto& [bar, rv] : bars) {
      r.push_back(rv.first);
      v.push_back(rv.second);
    }
    out.returns.push_back(std::move(r));
    if (with_volume) out.volumes.push_back(std::move(v));
  }
  return out;
}

void write_bars_csv(std::ostream& out, const ReturnSeries& bars) {
  CsvWriter w(out);
  if (bars.has_volume())
    w.header({"day", "bar", "log_return", "volume"});
  else
    w.header({"day", "bar", "log_return"});
  for (std::size_t d = 0; d < bars.returns.size(); ++d) {
    for (std::size_t b = 0; b < bars.returns[d].size(); ++b) {
      w.field(static_cast<std::int64_t>(d)).field(static_cast<std::int64_t>(b));
      w.field(bars.returns[d][b]);
      if (bars.has_volume()) w.field(bars.volumes[d][b]);
      w.end_row();
    }
  }
}

StylizedReport stylized_report(const ReturnSeries& standardized, const EvaluationConfig& config) {
  StylizedReport rep;
  const std::vector<double> pooled = standardized.pooled();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  rep.kurtosis = excess_kurtosis(pooled);
  rep.kurtosis_pass = rep.kurtosis > 0.0;

  std::vector<double> abs_pooled(pooled.size());
  std::transform(pooled.begin(), pooled.end(), abs_pooled.begin(),
                 [](double x) { return std::abs(x); });
  const auto k = static_cast<std::size_t>(
      std::ceil(config.tail_fraction * static_cast<double>(abs_pooled.size())));
  try {
    rep.tail_exponent = hill_tail_exponent(abs_pooled, k);
    rep.tail_pass =
        rep.tail_exponent >= config.tail_band_low && rep.tail_exponent <= config.tail_band_high;
  } catch (const std::invalid_argument&) {
    rep.tail_exponent = nan;
  }

  const std::vector<int> lags = config.lags();
  try {
    rep.acorr = acorr_coefficient(standardized.returns, lags).zeta;
    rep.acorr_pass = rep.acorr > 0.0 && rep.acorr < 1.0;
  } catch (const std::invalid_argument& e) {
    rep.acorr = nan;
    rep.acorr_note = e.what();
  }

  if (standardized.has_volume()) {
    std::vector<double> vol, absr;
    for (std::size_t d = 0; d < standardized.returns.size(); ++d) {
      for (std::size_t b = 0; b < standardized.returns[d].size(); ++b) {
        vol.push_back(standardized.volumes[d][b]);
        absr.push_back(std::abs(standardized.returns[d][b]));
      }
    }
    try {
      rep.vv_corr = volume_volatility_corr(vol, absr);
      rep.vv_pass = rep.vv_corr > 0.0;
    } catch (const std::invalid_argument& e) {
      rep.vv_corr = nan;
      rep.vv_note = e.what();
    }
  } else {
    rep.vv_corr = nan;
    rep.vv_note = "no volume column";
  }
  return rep;
}

void write_report(std::ostream& out, const StylizedReport& r) {
  CsvWriter w(out);
  w.header({"metric", "value", "pass"});
  w.field("kurtosis").field(r.kurtosis).field(r.kurtosis_pass ? "true" : "false");
  w.end_row();
  w.field("tail_exponent").field(r.tail_exponent).field(r.tail_pass ? "true" : "false");
  w.end_row();
  w.field("acorr").field(r.acorr).field(r.acorr_pass ? "true" : "false");
  w.end_row();
  w.field("vv_corr").field(r.vv_corr).field(r.vv_pass ? "true" : "false");
  w.end_row();
}

}  // namespace hetmarket
