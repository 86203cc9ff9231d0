#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hetmarket/config.hpp"
#include "hetmarket/point_cloud.hpp"

using namespace hetmarket;

namespace {

ReturnSeries one_day(std::vector<double> r) {
  ReturnSeries s;
  s.returns.push_back(std::move(r));
  return s;
}

}  // namespace

TEST(ReturnCloud, OnePointPerReturn) {
  const PointCloud c = build_return_cloud(one_day({0.5, -1.0, 2.0}));
  EXPECT_EQ(c.size(), 3);
  EXPECT_EQ(c.points.cols(), 1);
  EXPECT_EQ(c.points(1, 0), -1.0);
}

TEST(Subsample, DeterministicSubset) {
  std::vector<double> r(10000);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<double>(i);
  const PointCloud c = build_return_cloud(one_day(r));
  const PointCloud a = subsample(c, 100, 42), b = subsample(c, 100, 42), d = subsample(c, 100, 43);
  EXPECT_EQ(a.size(), 100);
  EXPECT_EQ(a.points, b.points);
  EXPECT_NE(a.points, d.points);
  for (Eigen::Index i = 1; i < a.size(); ++i) EXPECT_LT(a.points(i - 1, 0), a.points(i, 0));
  EXPECT_EQ(subsample(c, 20000, 1).size(), 10000);
}

TEST(TailCloud, EqualMagnitudesGiveZeros) {
  const PointCloud c = build_tail_cloud(one_day({1.5, -1.5, 1.5, -1.5, 1.5}), 2);
  EXPECT_EQ(c.points, Eigen::MatrixXd::Zero(2, 1));
}

TEST(TailCloud, IndexingConventions) {
  const ReturnSeries s = one_day({8.0, -4.0, 2.0, -1.0});
  const PointCloud hill = build_tail_cloud(s, 2);
  EXPECT_DOUBLE_EQ(hill.points(0, 0), std::log(8.0 / 2.0));
  EXPECT_DOUBLE_EQ(hill.points(1, 0), std::log(4.0 / 2.0));
  const PointCloud literal = build_tail_cloud(s, 2, true);
  EXPECT_DOUBLE_EQ(literal.points(0, 0), std::log(1.0 / 4.0));
  EXPECT_DOUBLE_EQ(literal.points(1, 0), std::log(2.0 / 4.0));
  EXPECT_THROW(build_tail_cloud(s, 4), std::invalid_argument);
  EXPECT_THROW(build_tail_cloud(s, 0), std::invalid_argument);
}

TEST(TailCloud, ScaleInvariant) {
  std::vector<double> r{0.3, -2.0, 1.1, 5.0, -0.7, 0.2};
  const PointCloud a = build_tail_cloud(one_day(r), 3);
  for (double& x : r) x *= 4.5;
  const PointCloud b = build_tail_cloud(one_day(r), 3);
  EXPECT_LT((a.points - b.points).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TailCloud, AgreesWithHillOnPareto) {
  // For Pareto(alpha) the log-excesses over a high order statistic are
  // exponential with mean 1/alpha, and the Hill estimate is 1/mean.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> r(100000);
  for (double& x : r) x = std::pow(1.0 - u(rng), -1.0 / 3.0);
  const PointCloud c = build_tail_cloud(one_day(r), 5000);
  const double mean = c.points.mean();
  EXPECT_NEAR(mean, 1.0 / 3.0, 4.0 / (3.0 * std::sqrt(5000.0)));
  std::vector<double> abs_r(r);
  EXPECT_NEAR(1.0 / mean, hill_tail_exponent(abs_r, 5000), 1e-9);
}

TEST(AcorrCloud, CountsAndConstantSeries) {
  ReturnSeries s;
  s.returns = {std::vector<double>(71, -0.5), std::vector<double>(80, 0.5)};
  const PointCloud c = build_acorr_cloud(s);
  EXPECT_EQ(c.size(), 1 + 10);
  EXPECT_EQ(c.points.cols(), 9);
  EXPECT_EQ(c.points, Eigen::MatrixXd::Constant(11, 9, 0.5));
  EXPECT_THROW(build_acorr_cloud(one_day(std::vector<double>(70, 1.0))), std::invalid_argument);
}

TEST(AcorrCloud, LagLayout) {
  std::vector<double> r(72);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = -static_cast<double>(i);
  const PointCloud c = build_acorr_cloud(one_day(r));
  ASSERT_EQ(c.size(), 2);
  for (std::size_t k = 0; k < kAcorrCloudLags.size(); ++k) {
    EXPECT_EQ(c.points(0, static_cast<Eigen::Index>(k)), kAcorrCloudLags[k]);
    EXPECT_EQ(c.points(1, static_cast<Eigen::Index>(k)), kAcorrCloudLags[k] + 1);
  }
}

TEST(Aggregate, WeightedSum) {
  const OtScores s{2.0, 1.0, 10.0};
  EXPECT_DOUBLE_EQ(aggregate_ot(s, 0.5, 0.3, 0.2), 3.3);
  EXPECT_EQ(aggregate_ot(s, 1, 0, 0), 2.0);
  EXPECT_EQ(aggregate_ot(OtScores{}, 1, 1, 1), 0.0);
}

TEST(Clouds, SelfDistanceIsZero) {
  std::mt19937_64 rng(8);
  std::student_t_distribution<double> t(3.0);
  ReturnSeries raw;
  for (int d = 0; d < 4; ++d) {
    std::vector<double> r(300);
    for (double& x : r) x = t(rng);
    raw.returns.push_back(r);
  }
  EvaluationConfig cfg;
  cfg.max_cloud_points = 200;
  const CloudSet a = build_clouds(standardize(raw), cfg, 5);
  EXPECT_EQ(a.tail.size(), 60);
  EXPECT_EQ(a.ret.size(), 200);
  const OtScores s = cloud_distances(a, a);
  EXPECT_EQ(s.ret, 0.0);
  EXPECT_EQ(s.tail, 0.0);
  EXPECT_NEAR(s.acorr, 0.0, 1e-12);
}
