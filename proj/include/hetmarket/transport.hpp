#pragma once

#include <Eigen/Dense>

namespace hetmarket {

struct TransportResult {
  double cost = 0.0;
  Eigen::MatrixXd plan;  // K x L, row sums 1/K, column sums 1/L
  long pivots = 0;
};

/// Exact uniform-marginal optimal transport between the rows of `a` (K x d)
/// and the rows of `b` (L x d) under squared Euclidean cost. Solved with a
/// transportation network simplex on integer-scaled marginals.
TransportResult solve_transport(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Transport for a general cost matrix with uniform marginals.
TransportResult solve_transport_costs(const Eigen::MatrixXd& cost);

/// Optimal cost only. One-dimensional clouds use the monotone (quantile)
/// coupling, which is exact for convex costs on the line.
double ot_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Squared Euclidean distances between rows.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace hetmarket
