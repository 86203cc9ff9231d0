#include "hetmarket/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace hetmarket {

namespace {

struct Cell {
  int row = 0;
  int col = 0;
  std::int64_t flow = 0;  // in units of the integer-scaled marginals
};

/// Transportation simplex on the bipartite spanning-tree basis.
///
/// Marginals are scaled to integers (row supply L/g, column demand K/g) and
/// perturbed so that every basis is nondegenerate: supplies become
/// supply*M + 1 and the last demand gains K, with M = 2K + 1. Any basis
/// optimal for the perturbed problem is optimal for the original one, and
/// the original flows are recovered by rounding flow / M.
class TransportSimplex {
 public:
  explicit TransportSimplex(const Eigen::MatrixXd& cost)
      : c_(cost), K_(static_cast<int>(cost.rows())), L_(static_cast<int>(cost.cols())) {
    if (K_ < 1 || L_ < 1) throw std::invalid_argument("transport needs non-empty marginals");
    if (!cost.allFinite()) throw std::invalid_argument("transport costs must be finite");
    const std::int64_t g = std::gcd<std::int64_t>(K_, L_);
    supply_ = L_ / g;
    demand_ = K_ / g;
    M_ = 2 * static_cast<std::int64_t>(K_) + 1;
    const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
    eps_ = 1e-11 * scale;
    initial_basis();
  }

  void solve() {
    const std::int64_t cells = static_cast<std::int64_t>(K_) * L_;
    const std::int64_t block =
        std::max<std::int64_t>(16, static_cast<std::int64_t>(std::sqrt(static_cast<double>(cells))));
    std::int64_t next = 0;
    for (;;) {
      double best = -eps_;
      std::int64_t best_cell = -1;
      std::int64_t scanned = 0;
      while (scanned < cells) {
        const std::int64_t stop = std::min(cells, scanned + block);
        for (; scanned < stop; ++scanned) {
          const int i = static_cast<int>(next / L_);
          const int j = static_cast<int>(next % L_);
          const double rc = c_(i, j) - pot_[i] - pot_[K_ + j];
          if (rc < best && !is_tree_edge(i, K_ + j)) {
            best = rc;
            best_cell = next;
          }
          if (++next == cells) next = 0;
        }
        if (best_cell >= 0) break;
      }
      if (best_cell < 0) return;
      pivot(static_cast<int>(best_cell / L_), static_cast<int>(best_cell % L_));
      ++pivots_;
    }
  }

  std::vector<Cell> basis() const {
    std::vector<Cell> out;
    for (int v = 0; v < K_ + L_; ++v) {
      if (parent_[v] < 0) continue;
      const int p = parent_[v];
      Cell cell;
      cell.row = v < K_ ? v : p;
      cell.col = (v < K_ ? p : v) - K_;
      cell.flow = (flow_[v] + M_ / 2) / M_;
      if (cell.flow > 0) out.push_back(cell);
    }
    return out;
  }

  // Mass of one unit of decoded flow.
  double unit_mass() const {
    return 1.0 / (static_cast<double>(supply_) * static_cast<double>(K_));
  }
  std::int64_t supply() const { return supply_; }
  std::int64_t demand() const { return demand_; }
  long pivots() const { return pivots_; }

 private:
  double edge_cost(int a, int b) const { return a < K_ ? c_(a, b - K_) : c_(b, a - K_); }

  bool is_tree_edge(int a, int b) const { return parent_[a] == b || parent_[b] == a; }

  void initial_basis() {
    const int n = K_ + L_;
    std::vector<std::int64_t> s(K_), d(L_);
    for (int i = 0; i < K_; ++i) s[i] = supply_ * M_ + 1;
    for (int j = 0; j < L_; ++j) d[j] = demand_ * M_;
    d[L_ - 1] += K_;

    // Northwest corner rule; nondegenerate marginals make it produce exactly
    // K + L - 1 positive cells forming a spanning tree.
    std::vector<std::vector<std::pair<int, std::int64_t>>> adj(n);
    int i = 0, j = 0, edges = 0;
    while (i < K_ && j < L_) {
      const std::int64_t x = std::min(s[i], d[j]);
      adj[i].push_back({K_ + j, x});
      adj[K_ + j].push_back({i, x});
      ++edges;
      s[i] -= x;
      d[j] -= x;
      if (s[i] == 0 && d[j] == 0) {
        ++i;
        ++j;
      } else if (s[i] == 0) {
        ++i;
      } else {
        ++j;
      }
    }
    if (edges != n - 1) throw std::logic_error("initial transport basis is degenerate");

    parent_.assign(n, -1);
    depth_.assign(n, 0);
    flow_.assign(n, 0);
    pot_.assign(n, 0.0);
    children_.assign(n, {});
    std::vector<int> stack{0};
    std::vector<bool> seen(n, false);
    seen[0] = true;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& [v, x] : adj[u]) {
        if (seen[v]) continue;
        seen[v] = true;
        parent_[v] = u;
        depth_[v] = depth_[u] + 1;
        flow_[v] = x;
        pot_[v] = edge_cost(u, v) - pot_[u];
        children_[u].push_back(v);
        stack.push_back(v);
      }
    }
  }

  void remove_child(int p, int v) {
    auto& ch = children_[p];
    auto it = std::find(ch.begin(), ch.end(), v);
    *it = ch.back();
    ch.pop_back();
  }

  void pivot(int row, int col) {
    const int u = row, v = K_ + col;
    // Tree path between u and v, split at their common ancestor. Edges are
    // identified by their child node.
    path_u_.clear();
    path_v_.clear();
    int a = u, b = v;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        path_u_.push_back(a);
        a = parent_[a];
      } else {
        path_v_.push_back(b);
        b = parent_[b];
      }
    }
    // Pushing flow along row u -> column v, the tree path back from v to u
    // loses flow on every edge traversed column-to-row.
    auto loses_on_v_side = [&](int child) { return child >= K_; };
    auto loses_on_u_side = [&](int child) { return child < K_; };

    std::int64_t delta = -1;
    int leaving = -1;
    bool leaving_on_u_side = false;
    for (int x : path_v_) {
      if (loses_on_v_side(x) && (delta < 0 || flow_[x] < delta)) {
        delta = flow_[x];
        leaving = x;
        leaving_on_u_side = false;
      }
    }
    for (int x : path_u_) {
      if (loses_on_u_side(x) && (delta < 0 || flow_[x] < delta)) {
        delta = flow_[x];
        leaving = x;
        leaving_on_u_side = true;
      }
    }
    if (leaving < 0) throw std::logic_error("transport problem is unbounded");
    for (int x : path_v_) flow_[x] += loses_on_v_side(x) ? -delta : delta;
    for (int x : path_u_) flow_[x] += loses_on_u_side(x) ? -delta : delta;

    // Detach the subtree below the leaving edge and hang it from the entering
    // edge, re-rooted at the entering endpoint it contains.
    const int inside = leaving_on_u_side ? u : v;
    const int outside = leaving_on_u_side ? v : u;
    remove_child(parent_[leaving], leaving);

    int child = inside;
    int par = parent_[inside];
    std::int64_t carried = flow_[inside];
    parent_[inside] = outside;
    flow_[inside] = delta;
    children_[outside].push_back(inside);
    while (child != leaving) {
      const int next_par = parent_[par];
      const std::int64_t next_flow = flow_[par];
      remove_child(par, child);
      children_[child].push_back(par);
      parent_[par] = child;
      flow_[par] = carried;
      carried = next_flow;
      child = par;
      par = next_par;
    }

    // Refresh potentials and depths in the moved subtree.
    std::vector<int>& stack = stack_;
    stack.assign(1, inside);
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      const int p = parent_[x];
      depth_[x] = depth_[p] + 1;
      pot_[x] = edge_cost(x, p) - pot_[p];
      for (int y : children_[x]) stack.push_back(y);
    }
  }

  const Eigen::MatrixXd& c_;
  int K_, L_;
  std::int64_t supply_ = 1, demand_ = 1, M_ = 1;
  double eps_ = 0.0;
  std::vector<int> parent_, depth_;
  std::vector<std::int64_t> flow_;
  std::vector<double> pot_;
  std::vector<std::vector<int>> children_;
  std::vector<int> path_u_, path_v_, stack_;
  long pivots_ = 0;
};

void check_clouds(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() < 1 || b.rows() < 1) throw std::invalid_argument("point clouds must be non-empty");
  if (a.cols() != b.cols()) throw std::invalid_argument("point cloud dimensions differ");
}

double monotone_coupling_cost(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<double> x(a.data(), a.data() + a.rows());
  std::vector<double> y(b.data(), b.data() + b.rows());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto K = static_cast<std::int64_t>(x.size());
  const auto L = static_cast<std::int64_t>(y.size());
  // Each x carries L units and each y carries K units of K*L total mass.
  std::int64_t left_x = L, left_y = K;
  std::size_t i = 0, j = 0;
  double total = 0.0;
  while (i < x.size() && j < y.size()) {
    const std::int64_t m = std::min(left_x, left_y);
    const double d = x[i] - y[j];
    total += static_cast<double>(m) * d * d;
    left_x -= m;
    left_y -= m;
    if (left_x == 0) {
      ++i;
      left_x = L;
    }
    if (left_y == 0) {
      ++j;
      left_y = K;
    }
  }
  return total / (static_cast<double>(K) * static_cast<double>(L));
}

}  // namespace

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_clouds(a, b);
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  return d;
}

TransportResult solve_transport_costs(const Eigen::MatrixXd& cost) {
  TransportSimplex simplex(cost);
  simplex.solve();
  TransportResult result;
  result.plan = Eigen::MatrixXd::Zero(cost.rows(), cost.cols());
  const double unit = simplex.unit_mass();
  for (const Cell& cell : simplex.basis()) {
    const double mass = static_cast<double>(cell.flow) * unit;
    result.plan(cell.row, cell.col) = mass;
    result.cost += cost(cell.row, cell.col) * mass;
  }
  result.pivots = simplex.pivots();
  return result;
}

TransportResult solve_transport(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd cost = squared_distances(a, b);
  return solve_transport_costs(cost);
}

double ot_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_clouds(a, b);
  if (a.cols() == 1) return monotone_coupling_cost(a, b);
  const Eigen::MatrixXd cost = squared_distances(a, b);
  TransportSimplex simplex(cost);
  simplex.solve();
  double total = 0.0;
  for (const Cell& cell : simplex.basis())
    total += cost(cell.row, cell.col) * static_cast<double>(cell.flow);
  return total * simplex.unit_mass();
}

}  // namespace hetmarket
