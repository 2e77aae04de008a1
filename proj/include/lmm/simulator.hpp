#pragma once

#include <cstdint>
#include <vector>

#include "lmm/core.hpp"
#include "lmm/dpsolver.hpp"

namespace lmm {

enum class MarketEventKind : std::int8_t {
    price_up = 0,
    price_down = 1,
    uninformed_buy = 2,
    uninformed_sell = 3
};

const char* to_string(MarketEventKind k);

struct MarketEvent {
    double t = 0.0;
    MarketEventKind kind = MarketEventKind::price_up;
};

struct MarketEventStream {
    std::uint64_t seed = 0;
    double horizon = 0.0;
    std::vector<MarketEvent> events;  // time-ordered; price moves sort first on ties
};

/// Independent Poisson streams for jumps and uninformed arrivals, merged in
/// time order; reproducible from the seed.
MarketEventStream simulate_market(const ModelParams& params, std::uint64_t seed, double horizon);

enum class TradeKind : std::int8_t { uninformed, adverse, immediate, unwind };

const char* to_string(TradeKind k);

/// One execution. Prices are exact half-ticks (mid = 2p, quotes odd).
struct Trade {
    double t = 0.0;
    Side side = Side::ask;
    std::int64_t price_ht = 0;
    TradeKind kind = TradeKind::uninformed;
    int period = -1;  // period whose order management produced the order
};

struct SimStart {
    std::int64_t wealth_ht = 0;
    std::int64_t price_ticks = 0;
    int inventory = 0;
};

struct SimResult {
    SimStart start;
    std::int64_t terminal_wealth_ht = 0;
    std::vector<Trade> trades;
    std::vector<std::pair<double, int>> inventory_path;  // (t, q) after each change
    std::vector<ActionPair> quote_path;                  // actions taken at t_0..t_{N-1}
    ReducedState final_state;                            // at t_{N+}-, prices clamped

    double terminal_wealth_ticks() const { return static_cast<double>(terminal_wealth_ht) / 2.0; }
};

/// Deterministic replay of the event stream against the policy's action
/// schedule: decisions at t_i on left-limit states, order arrivals at
/// t_i + delta_tau, terminal unwind at t_N + delta_tau against the touch.
SimResult run_policy(const Policy& policy, const StateSpace& space,
                     const MarketEventStream& stream, const ModelParams& params,
                     const SimStart& start);

struct McValue {
    double mean = 0.0;       // ticks
    double std_error = 0.0;  // ticks
    int n_paths = 0;
};

/// Sample mean/SE of terminal wealth over independently seeded paths
/// (per-path seeds derived from `seed`; parallel over paths).
McValue mc_policy_value(const Policy& policy, const StateSpace& space, const ModelParams& params,
                        const SimStart& start, int n_paths, std::uint64_t seed,
                        const SolveOptions& opts = {});

/// Re-derives the cash ledger and checks every trade's site condition
/// against the raw stream; throws std::logic_error on any violation.
void audit_result(const SimResult& result, const MarketEventStream& stream,
                  const ModelParams& params);

}  // namespace lmm
