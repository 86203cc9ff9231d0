#include "hetmarket/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hetmarket/config.hpp"
#include "hetmarket/transport.hpp"

namespace hetmarket {

PointCloud build_return_cloud(const ReturnSeries& standardized) {
  const std::vector<double> all = standardized.pooled();
  if (all.empty()) throw std::invalid_argument("return cloud needs at least one return");
  PointCloud cloud;
  cloud.kind = CloudKind::Return;
  cloud.points = Eigen::Map<const Eigen::VectorXd>(all.data(), static_cast<Eigen::Index>(all.size()));
  return cloud;
}

PointCloud build_tail_cloud(const ReturnSeries& standardized, std::size_t k,
                            bool descending_indexing) {
  std::vector<double> abs_r = standardized.pooled();
  const std::size_t n = abs_r.size();
  if (k < 1 || k >= n) throw std::invalid_argument("tail cloud requires 1 <= K < N");
  for (double& x : abs_r) x = std::abs(x);
  std::sort(abs_r.begin(), abs_r.end(), std::greater<>());  // abs_r[0] is the largest

  // (K+1)-th largest, or the (N-K)-th largest under descending indexing.
  const double reference = descending_indexing ? abs_r[n - k - 1] : abs_r[k];
  if (!(reference > 0.0)) throw std::invalid_argument("tail cloud reference statistic is zero");
  PointCloud cloud;
  cloud.kind = CloudKind::Tail;
  cloud.points.resize(static_cast<Eigen::Index>(k), 1);
  for (std::size_t i = 0; i < k; ++i) {
    // Hill form: the i-th largest. Descending form: the i-th smallest.
    const double x = descending_indexing ? abs_r[n - 1 - i] : abs_r[i];
    if (!(x > 0.0)) throw std::invalid_argument("tail cloud contains a zero return");
    cloud.points(static_cast<Eigen::Index>(i), 0) = std::log(x / reference);
  }
  return cloud;
}

PointCloud build_acorr_cloud(const ReturnSeries& standardized) {
  const int span = kAcorrCloudLags.back();
  std::size_t rows = 0;
  for (const auto& day : standardized.returns) {
    if (day.size() <= static_cast<std::size_t>(span))
      throw std::invalid_argument("lag cloud needs series longer than " + std::to_string(span));
    rows += day.size() - span;
  }
  if (rows == 0) throw std::invalid_argument("lag cloud needs at least one series");
  PointCloud cloud;
  cloud.kind = CloudKind::Acorr;
  cloud.points.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(kAcorrCloudLags.size()));
  Eigen::Index row = 0;
  for (const auto& day : standardized.returns) {
    for (std::size_t t = 0; t + span < day.size(); ++t, ++row) {
      for (std::size_t c = 0; c < kAcorrCloudLags.size(); ++c)
        cloud.points(row, static_cast<Eigen::Index>(c)) = std::abs(day[t + kAcorrCloudLags[c]]);
    }
  }
  return cloud;
}

PointCloud subsample(const PointCloud& cloud, std::size_t max_points, std::uint64_t seed) {
  if (max_points == 0) throw std::invalid_argument("subsample size must be >= 1");
  const auto n = static_cast<std::size_t>(cloud.points.rows());
  if (n <= max_points) return cloud;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first max_points entries are a uniform sample.
  for (std::size_t i = 0; i < max_points; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(max_points);
  std::sort(idx.begin(), idx.end());
  PointCloud out;
  out.kind = cloud.kind;
  out.points.resize(static_cast<Eigen::Index>(max_points), cloud.points.cols());
  for (std::size_t i = 0; i < max_points; ++i)
    out.points.row(static_cast<Eigen::Index>(i)) = cloud.points.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

CloudSet build_clouds(const ReturnSeries& standardized, const EvaluationConfig& config,
                      std::uint64_t seed) {
  const auto cap = static_cast<std::size_t>(config.max_cloud_points);
  const auto k = static_cast<std::size_t>(
      std::ceil(config.tail_fraction * static_cast<double>(standardized.total())));
  CloudSet set;
  set.ret = subsample(build_return_cloud(standardized), cap, seed);
  set.tail = subsample(build_tail_cloud(standardized, k, config.descending_tail_indexing), cap,
                       seed + 1);
  set.acorr = subsample(build_acorr_cloud(standardized), cap, seed + 2);
  return set;
}

OtScores cloud_distances(const CloudSet& synthetic, const CloudSet& real) {
  OtScores s;
  s.ret = ot_distance(synthetic.ret.points, real.ret.points);
  s.tail = ot_distance(synthetic.tail.points, real.tail.points);
  s.acorr = ot_distance(synthetic.acorr.points, real.acorr.points);
  return s;
}

double aggregate_ot(const OtScores& s, double weight_return, double weight_tail,
                    double weight_acorr) {
  return weight_return * s.ret + weight_tail * s.tail + weight_acorr * s.acorr;
}

}  // namespace hetmarket
