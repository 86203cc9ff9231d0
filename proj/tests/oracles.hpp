#pragma once

// Reference implementations used only as test oracles. They favour obvious
// correctness over speed.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "hetmarket/order_book.hpp"

namespace oracle {

using hetmarket::AgentId;
using hetmarket::Step;
using hetmarket::Trade;

/// Flat list of resting orders; every submit scans the whole list.
class NaiveBook {
 public:
  struct Resting {
    std::uint64_t seq;
    AgentId agent;
    bool buy;
    std::int64_t ticks;
    std::int64_t remaining;
    Step time;
  };

  explicit NaiveBook(double tick) : tick_(tick) {}

  std::vector<Trade> submit(AgentId agent, std::int64_t signed_volume, double price, Step time) {
    const bool buy = signed_volume > 0;
    const std::int64_t ticks = std::max<std::int64_t>(1, std::llround(price / tick_));
    std::int64_t left = std::llabs(signed_volume);
    std::vector<Trade> trades;
    auto crosses = [&](const Resting& r) { return buy ? r.ticks <= ticks : r.ticks >= ticks; };
    auto better = [&](const Resting& a, const Resting& b) {
      if (a.ticks != b.ticks) return buy ? a.ticks < b.ticks : a.ticks > b.ticks;
      return a.seq < b.seq;
    };
    while (left > 0) {
      Resting* best = nullptr;
      for (Resting& r : book_)
        if (r.buy != buy && r.agent != agent && crosses(r) && (!best || better(r, *best))) best = &r;
      if (!best) break;
      const std::int64_t q = std::min(left, best->remaining);
      Trade t;
      t.step = time;
      t.price = static_cast<double>(best->ticks) / std::round(1.0 / tick_);
      t.volume = q;
      t.buyer_id = buy ? agent : best->agent;
      t.seller_id = buy ? best->agent : agent;
      trades.push_back(t);
      left -= q;
      best->remaining -= q;
      book_.erase(std::remove_if(book_.begin(), book_.end(), [](const Resting& r) { return r.remaining == 0; }),
                  book_.end());
    }
    if (left > 0) {
      bool still_crosses = false;
      for (const Resting& r : book_)
        if (r.buy != buy && crosses(r)) still_crosses = true;
      if (!still_crosses) book_.push_back({next_++, agent, buy, ticks, left, time});
    }
    return trades;
  }

  /// (ticks, remaining, agent) of one side in priority order.
  std::vector<std::tuple<std::int64_t, std::int64_t, AgentId>> side(bool buy) const {
    std::vector<Resting> s;
    for (const Resting& r : book_)
      if (r.buy == buy) s.push_back(r);
    std::sort(s.begin(), s.end(), [&](const Resting& a, const Resting& b) {
      if (a.ticks != b.ticks) return buy ? a.ticks > b.ticks : a.ticks < b.ticks;
      return a.seq < b.seq;
    });
    std::vector<std::tuple<std::int64_t, std::int64_t, AgentId>> out;
    for (const Resting& r : s) out.emplace_back(r.ticks, r.remaining, r.agent);
    return out;
  }

 private:
  double tick_;
  std::uint64_t next_ = 0;
  std::vector<Resting> book_;
};

/// Exact uniform-marginal transport by exhaustive search over integer
/// vertices: row i ships L units, column j receives K units, and rows are
/// allocated one at a time with memoization on the remaining column demand.
inline double brute_force_transport(const Eigen::MatrixXd& cost) {
  const int K = static_cast<int>(cost.rows()), L = static_cast<int>(cost.cols());
  std::map<std::pair<int, std::vector<int>>, double> memo;
  std::function<double(int, const std::vector<int>&)> best = [&](int row,
                                                                 const std::vector<int>& demand) {
    if (row == K) return 0.0;
    auto key = std::make_pair(row, demand);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    double result = std::numeric_limits<double>::infinity();
    std::vector<int> d = demand;
    // Enumerate every split of L units of row `row` over the columns.
    std::function<void(int, int, double)> split = [&](int col, int left, double acc) {
      if (col == L - 1) {
        if (left > d[col]) return;
        d[col] -= left;
        result = std::min(result, acc + left * cost(row, col) + best(row + 1, d));
        d[col] += left;
        return;
      }
      for (int x = 0; x <= std::min(left, d[col]); ++x) {
        d[col] -= x;
        split(col + 1, left - x, acc + x * cost(row, col));
        d[col] += x;
      }
    };
    split(0, L, 0.0);
    memo[key] = result;
    return result;
  };
  return best(0, std::vector<int>(L, K)) / (static_cast<double>(K) * L);
}

/// Central finite-difference gradient of f at x.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace oracle
