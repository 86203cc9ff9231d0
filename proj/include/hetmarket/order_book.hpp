#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <vector>

namespace hetmarket {

using AgentId = std::int32_t;
using Step = std::int64_t;
using Ticks = std::int64_t;

enum class Side { Buy, Sell };

/// Lifetime value that disables order expiry.
inline constexpr Step kNoExpiry = std::numeric_limits<Step>::max();

/// A limit order. `signed_volume` is positive for buys and negative for sells;
/// `remaining_volume` is the unfilled magnitude.
struct Order {
  AgentId agent_id = 0;
  std::int64_t signed_volume = 0;
  double price = 0.0;
  Step submit_time = 0;
  std::int64_t remaining_volume = 0;

  static Order limit(AgentId agent, std::int64_t signed_volume, double price,
                     Step submit_time);

  Side side() const { return signed_volume > 0 ? Side::Buy : Side::Sell; }
  void validate() const;
};

struct Trade {
  Step step = 0;
  double price = 0.0;
  std::int64_t volume = 0;
  AgentId buyer_id = 0;
  AgentId seller_id = 0;

  bool operator==(const Trade&) const = default;
};

struct LevelSnapshot {
  Side side = Side::Buy;
  double price = 0.0;
  std::int64_t volume = 0;
};

/// Continuous double auction with price-time priority. Executions happen at
/// the resting order's price. Prices are quantized to the tick grid on entry.
///
/// An incoming order never trades against resting orders of the same agent.
/// If, after matching, the remainder would still cross the opposite side
/// (which can then only hold the agent's own orders), the remainder is
/// cancelled so the book stays uncrossed.
class OrderBook {
 public:
  explicit OrderBook(double tick_size = 0.1);

  std::vector<Trade> submit(const Order& order);

  std::optional<double> best_bid() const;
  std::optional<double> best_ask() const;
  std::optional<double> last_trade_price() const { return last_trade_price_; }

  /// Mean of best bid and best ask, or `fallback` when either side is empty.
  double mid_price(double fallback) const;

  /// Decay-weighted resting volume within the open band of relative width
  /// `depth_range` on the given side of `mid`.
  double depth_weighted_volume(Side side, double mid, double depth_range,
                               double decay) const;

  /// Removes resting orders with submit_time <= now - lifetime.
  std::size_t expire_orders(Step now, Step lifetime);

  double tick_size() const { return tick_size_; }
  Ticks to_ticks(double price) const;
  double to_price(Ticks ticks) const {
    // Dividing by an integral inverse tick gives the correctly rounded
    // decimal (1001 / 10 == 100.1, unlike 1001 * 0.1).
    return ticks_per_unit_ > 0.0 ? static_cast<double>(ticks) / ticks_per_unit_
                                 : static_cast<double>(ticks) * tick_size_;
  }

  std::size_t resting_order_count() const;
  std::int64_t resting_volume(Side side) const;
  /// Aggregated price levels, best first.
  std::vector<LevelSnapshot> snapshot(Side side) const;
  /// Individual resting orders in priority order (best price, then oldest).
  std::vector<Order> resting_orders(Side side) const;

  void clear();

 private:
  struct Resting {
    std::uint64_t id = 0;
    AgentId agent = 0;
    std::int64_t original = 0;
    std::int64_t remaining = 0;
    Step submit_time = 0;
  };
  using Level = std::deque<Resting>;
  struct ExpiryEntry {
    std::uint64_t id = 0;
    Step submit_time = 0;
    Side side = Side::Buy;
    Ticks ticks = 0;
  };

  template <typename Book, typename Crosses>
  std::int64_t match_against(Book& opposite, const Order& order, Ticks limit,
                             Crosses crosses, std::vector<Trade>& trades);

  double tick_size_;
  double ticks_per_unit_ = 0.0;  // 1 / tick_size when integral
  std::map<Ticks, Level, std::greater<>> bids_;
  std::map<Ticks, Level> asks_;
  std::deque<ExpiryEntry> expiry_queue_;
  std::optional<double> last_trade_price_;
  std::uint64_t next_id_ = 1;
};

/// Geometric random walk with zero drift.
class FundamentalProcess {
 public:
  FundamentalProcess(double initial_value, double step_volatility, std::uint64_t seed);

  double step();
  double value() const { return value_; }
  double step_volatility() const { return step_volatility_; }

 private:
  double value_;
  double step_volatility_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

struct MarketClock {
  Step t = 0;
  Step T_sim = 0;
  int n = 0;

  bool advance() {
    if (t >= T_sim) return false;
    ++t;
    return true;
  }
};

void write_trades_csv(std::ostream& out, const std::vector<Trade>& trades);
void write_book_snapshot_csv(std::ostream& out, const OrderBook& book);

}  // namespace hetmarket
