#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lmm/core.hpp"

namespace lmm {

/// LOBSTER message types.
enum class OrderEventType : std::int8_t {
    submission = 1,
    partial_cancel = 2,
    deletion = 3,
    execution_visible = 4,
    execution_hidden = 5,
    cross = 6,
    halt = 7
};

struct OrderEvent {
    double timestamp = 0.0;  // seconds since midnight
    OrderEventType type = OrderEventType::submission;
    long order_id = 0;
    long size = 0;
    long price = 0;     // price x 10^4 convention
    int direction = 0;  // +1 resting buy side, -1 resting sell side
};

struct BookSnapshot {
    double timestamp = 0.0;
    long best_ask = 0;
    long ask_size = 0;
    long best_bid = 0;
    long bid_size = 0;
    long spread() const { return best_ask - best_bid; }
    long mid2() const { return best_ask + best_bid; }  // twice the mid, exact
};

/// Row-paired events and snapshots plus parse warnings (rejected rows carry
/// their line numbers).
struct LobsterData {
    std::vector<OrderEvent> events;
    std::vector<BookSnapshot> snapshots;
    std::vector<std::string> warnings;
};

/// Parses a LOBSTER message/orderbook file pair (level-1 book columns are
/// used; deeper levels are ignored). Malformed rows are rejected with their
/// line numbers in warnings; non-monotone timestamps warn and stable-sort.
LobsterData parse_lobster(const std::string& message_path, const std::string& orderbook_path);

/// Mid-price jump intensity per minute over the one-tick-spread segments.
double estimate_lambda(const std::vector<BookSnapshot>& snapshots, long tick_units);

/// Uninformed market-order intensities (per minute). A market order is one
/// timestamp/direction group of visible executions; it is uninformed when
/// the mid at the first row after the group matches the mid just before it.
/// Splits the total in half unless side_resolved is set.
std::pair<double, double> estimate_uninformed_rates(const std::vector<OrderEvent>& events,
                                                    const std::vector<BookSnapshot>& snapshots,
                                                    bool side_resolved = false);

enum class InjectionOutcome : std::int8_t { discarded, censored, type1, type2 };

const char* to_string(InjectionOutcome o);

struct InjectionRecord {
    double decision_time = 0.0;
    InjectionOutcome outcome = InjectionOutcome::discarded;
    double resolve_time = 0.0;  // fill or censor time, 0 when discarded
};

struct ReplayConfig {
    double latency = 0.0;
    int n_orders = 500;
    std::uint64_t seed = 1;
    Side side = Side::bid;
};

struct ReplayResult {
    double latency = 0.0;
    int n_injected = 0;  // orders surviving the latency-window filter
    int n_type1 = 0;     // fills with the mid unmoved
    int n_type2 = 0;     // fills at a price move
    double ratio_estimate = 0.0;  // n1/n2, estimates lambda_side / (lambda/2)
    bool insufficient = false;    // fewer than 30 surviving injections
    std::vector<InjectionRecord> records;
};

/// Injects infinitesimal best-quote orders at uniform random times, drops
/// those whose latency window sees a mid move, and tracks each under
/// price-time priority (cumulative executed volume at the level must reach
/// the displayed volume that was ahead at insertion) until filled before the
/// adverse-side move or censored.
ReplayResult replay_artificial_orders(const std::vector<OrderEvent>& events,
                                      const std::vector<BookSnapshot>& snapshots,
                                      const ReplayConfig& config);

}  // namespace lmm
