#include "hetmarket/order_book.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "hetmarket/csv.hpp"

namespace hetmarket {

Order Order::limit(AgentId agent, std::int64_t signed_volume, double price, Step submit_time) {
  Order order;
  order.agent_id = agent;
  order.signed_volume = signed_volume;
  order.price = price;
  order.submit_time = submit_time;
  order.remaining_volume = signed_volume < 0 ? -signed_volume : signed_volume;
  order.validate();
  return order;
}

void Order::validate() const {
  if (signed_volume == 0) throw std::invalid_argument("order volume must be non-zero");
  if (!(price > 0.0) || !std::isfinite(price))
    throw std::invalid_argument("order price must be positive and finite");
  const std::int64_t magnitude = signed_volume < 0 ? -signed_volume : signed_volume;
  if (remaining_volume < 0 || remaining_volume > magnitude)
    throw std::invalid_argument("order remaining volume out of range");
}

OrderBook::OrderBook(double tick_size) : tick_size_(tick_size) {
  if (!(tick_size > 0.0)) throw std::invalid_argument("tick size must be positive");
  const double inverse = std::round(1.0 / tick_size);
  if (inverse >= 1.0 && std::abs(inverse * tick_size - 1.0) < 1e-12) ticks_per_unit_ = inverse;
}

Ticks OrderBook::to_ticks(double price) const {
  const auto ticks = static_cast<Ticks>(std::llround(price / tick_size_));
  return std::max<Ticks>(ticks, 1);
}

template <typename Book, typename Crosses>
std::int64_t OrderBook::match_against(Book& opposite, const Order& order, Ticks limit,
                                      Crosses crosses, std::vector<Trade>& trades) {
  std::int64_t remaining = order.remaining_volume;
  const bool is_buy = order.side() == Side::Buy;
  for (auto level = opposite.begin(); level != opposite.end() && remaining > 0;) {
    if (!crosses(level->first, limit)) break;
    Level& queue = level->second;
    for (auto it = queue.begin(); it != queue.end() && remaining > 0;) {
      if (it->agent == order.agent_id) {
        ++it;
        continue;
      }
      const std::int64_t fill = std::min(remaining, it->remaining);
      Trade trade;
      trade.step = order.submit_time;
      trade.price = to_price(level->first);
      trade.volume = fill;
      trade.buyer_id = is_buy ? order.agent_id : it->agent;
      trade.seller_id = is_buy ? it->agent : order.agent_id;
      trades.push_back(trade);
      last_trade_price_ = trade.price;
      remaining -= fill;
      it->remaining -= fill;
      if (it->remaining == 0)
        it = queue.erase(it);
      else
        ++it;
    }
    if (queue.empty())
      level = opposite.erase(level);
    else
      ++level;
  }
  return remaining;
}

std::vector<Trade> OrderBook::submit(const Order& order) {
  order.validate();
  std::vector<Trade> trades;
  const Ticks limit = to_ticks(order.price);
  const Side side = order.side();

  std::int64_t remaining = 0;
  bool still_crosses = false;
  if (side == Side::Buy) {
    remaining = match_against(asks_, order, limit,
                              [](Ticks level, Ticks lim) { return level <= lim; }, trades);
    still_crosses = !asks_.empty() && asks_.begin()->first <= limit;
  } else {
    remaining = match_against(bids_, order, limit,
                              [](Ticks level, Ticks lim) { return level >= lim; }, trades);
    still_crosses = !bids_.empty() && bids_.begin()->first >= limit;
  }

  if (remaining > 0 && !still_crosses) {
    Resting resting{next_id_++, order.agent_id,
                    order.signed_volume < 0 ? -order.signed_volume : order.signed_volume,
                    remaining, order.submit_time};
    if (side == Side::Buy)
      bids_[limit].push_back(resting);
    else
      asks_[limit].push_back(resting);
    // Kept sorted by submit time; in-order submissions append in O(1).
    const ExpiryEntry entry{resting.id, resting.submit_time, side, limit};
    auto at = expiry_queue_.end();
    if (!expiry_queue_.empty() && expiry_queue_.back().submit_time > entry.submit_time)
      at = std::upper_bound(expiry_queue_.begin(), expiry_queue_.end(), entry.submit_time,
                            [](Step t, const ExpiryEntry& e) { return t < e.submit_time; });
    expiry_queue_.insert(at, entry);
  }
  return trades;
}

std::optional<double> OrderBook::best_bid() const {
  if (bids_.empty()) return std::nullopt;
  return to_price(bids_.begin()->first);
}

std::optional<double> OrderBook::best_ask() const {
  if (asks_.empty()) return std::nullopt;
  return to_price(asks_.begin()->first);
}

double OrderBook::mid_price(double fallback) const {
  if (bids_.empty() || asks_.empty()) return fallback;
  return 0.5 * (to_price(bids_.begin()->first) + to_price(asks_.begin()->first));
}

double OrderBook::depth_weighted_volume(Side side, double mid, double depth_range,
                                        double decay) const {
  double total = 0.0;
  auto weight = [&](double price) { return std::exp(-decay * std::abs(mid - price) / mid); };
  if (side == Side::Buy) {
    const double lower = mid * (1.0 - depth_range);
    for (const auto& [ticks, queue] : bids_) {
      const double price = to_price(ticks);
      if (price >= mid) continue;
      if (price <= lower) break;
      std::int64_t volume = 0;
      for (const auto& r : queue) volume += r.remaining;
      total += static_cast<double>(volume) * weight(price);
    }
  } else {
    const double upper = mid * (1.0 + depth_range);
    for (const auto& [ticks, queue] : asks_) {
      const double price = to_price(ticks);
      if (price <= mid) continue;
      if (price >= upper) break;
      std::int64_t volume = 0;
      for (const auto& r : queue) volume += r.remaining;
      total += static_cast<double>(volume) * weight(price);
    }
  }
  return total;
}

std::size_t OrderBook::expire_orders(Step now, Step lifetime) {
  if (lifetime < 1) throw std::invalid_argument("order lifetime must be >= 1");
  if (lifetime == kNoExpiry) return 0;
  std::size_t removed = 0;
  const Step cutoff = now - lifetime;
  while (!expiry_queue_.empty() && expiry_queue_.front().submit_time <= cutoff) {
    const ExpiryEntry entry = expiry_queue_.front();
    expiry_queue_.pop_front();
    auto remove_from = [&](auto& book) {
      auto level = book.find(entry.ticks);
      if (level == book.end()) return;
      auto& queue = level->second;
      auto it = std::find_if(queue.begin(), queue.end(),
                             [&](const Resting& r) { return r.id == entry.id; });
      if (it == queue.end()) return;
      queue.erase(it);
      ++removed;
      if (queue.empty()) book.erase(level);
    };
    if (entry.side == Side::Buy)
      remove_from(bids_);
    else
      remove_from(asks_);
  }
  return removed;
}

std::size_t OrderBook::resting_order_count() const {
  std::size_t count = 0;
  for (const auto& [t, q] : bids_) count += q.size();
  for (const auto& [t, q] : asks_) count += q.size();
  return count;
}

std::int64_t OrderBook::resting_volume(Side side) const {
  std::int64_t total = 0;
  auto sum = [&](const auto& book) {
    for (const auto& [t, q] : book)
      for (const auto& r : q) total += r.remaining;
  };
  if (side == Side::Buy)
    sum(bids_);
  else
    sum(asks_);
  return total;
}

std::vector<LevelSnapshot> OrderBook::snapshot(Side side) const {
  std::vector<LevelSnapshot> levels;
  auto collect = [&](const auto& book) {
    for (const auto& [ticks, queue] : book) {
      std::int64_t volume = 0;
      for (const auto& r : queue) volume += r.remaining;
      levels.push_back({side, to_price(ticks), volume});
    }
  };
  if (side == Side::Buy)
    collect(bids_);
  else
    collect(asks_);
  return levels;
}

std::vector<Order> OrderBook::resting_orders(Side side) const {
  std::vector<Order> orders;
  auto collect = [&](const auto& book) {
    for (const auto& [ticks, queue] : book) {
      for (const auto& r : queue) {
        Order o;
        o.agent_id = r.agent;
        o.signed_volume = side == Side::Buy ? r.original : -r.original;
        o.price = to_price(ticks);
        o.submit_time = r.submit_time;
        o.remaining_volume = r.remaining;
        orders.push_back(o);
      }
    }
  };
  if (side == Side::Buy)
    collect(bids_);
  else
    collect(asks_);
  return orders;
}

void OrderBook::clear() {
  bids_.clear();
  asks_.clear();
  expiry_queue_.clear();
  last_trade_price_.reset();
}

FundamentalProcess::FundamentalProcess(double initial_value, double step_volatility,
                                       std::uint64_t seed)
    : value_(initial_value), step_volatility_(step_volatility), rng_(seed) {
  if (!(initial_value > 0.0)) throw std::invalid_argument("fundamental value must be positive");
  if (step_volatility < 0.0) throw std::invalid_argument("fundamental volatility must be >= 0");
}

double FundamentalProcess::step() {
  if (step_volatility_ > 0.0) value_ *= std::exp(step_volatility_ * noise_(rng_));
  return value_;
}

void write_trades_csv(std::ostream& out, const std::vector<Trade>& trades) {
  CsvWriter csv(out);
  csv.header({"step", "price", "volume", "buyer_id", "seller_id"});
  for (const auto& t : trades) {
    csv.field(t.step).field(t.price).field(t.volume).field(t.buyer_id).field(t.seller_id);
    csv.end_row();
  }
}

void write_book_snapshot_csv(std::ostream& out, const OrderBook& book) {
  CsvWriter csv(out);
  csv.header({"side", "price", "volume"});
  for (const auto& level : book.snapshot(Side::Buy)) {
    csv.field("buy").field(level.price).field(level.volume);
    csv.end_row();
  }
  for (const auto& level : book.snapshot(Side::Sell)) {
    csv.field("sell").field(level.price).field(level.volume);
    csv.end_row();
  }
}

}  // namespace hetmarket
