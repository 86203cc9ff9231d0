#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

#include "hetmarket/stylized_facts.hpp"

namespace hetmarket {

struct EvaluationConfig;

enum class CloudKind { Return, Tail, Acorr };

struct PointCloud {
  CloudKind kind = CloudKind::Return;
  Eigen::MatrixXd points;  // K x d

  Eigen::Index size() const { return points.rows(); }
};

/// Offsets of the absolute-return lag vector.
inline constexpr std::array<int, 9> kAcorrCloudLags = {0, 1, 10, 20, 30, 40, 50, 60, 70};

/// One point per standardized return.
PointCloud build_return_cloud(const ReturnSeries& standardized);

/// Log-ratios of the `k` largest absolute returns to the (k+1)-th largest,
/// i.e. log(r_(N-i+1) / r_(N-K)) with ascending order statistics. With
/// `descending_indexing` the same formula is read with r_(1) >= ... >= r_(N),
/// which pairs the k smallest values with the (N-K)-th largest.
PointCloud build_tail_cloud(const ReturnSeries& standardized, std::size_t k,
                            bool descending_indexing = false);

/// (|r_t|, |r_t+1|, |r_t+10|, ..., |r_t+70|) for every t with a full window.
PointCloud build_acorr_cloud(const ReturnSeries& standardized);

/// Uniform subsample without replacement, rows kept in original order.
PointCloud subsample(const PointCloud& cloud, std::size_t max_points, std::uint64_t seed);

struct CloudSet {
  PointCloud ret;
  PointCloud tail;
  PointCloud acorr;
};

/// Tail size k = ceil(tail_fraction * N). Each cloud is capped at
/// `max_cloud_points` rows.
CloudSet build_clouds(const ReturnSeries& standardized, const EvaluationConfig& config,
                      std::uint64_t seed);

struct OtScores {
  double ret = 0.0;
  double tail = 0.0;
  double acorr = 0.0;
};

OtScores cloud_distances(const CloudSet& synthetic, const CloudSet& real);

double aggregate_ot(const OtScores& scores, double weight_return, double weight_tail,
                    double weight_acorr);

}  // namespace hetmarket
