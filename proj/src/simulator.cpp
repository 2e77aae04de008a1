#include "lmm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lmm/rng.hpp"

namespace lmm {

const char* to_string(MarketEventKind k) {
    switch (k) {
        case MarketEventKind::price_up: return "price_up";
        case MarketEventKind::price_down: return "price_down";
        case MarketEventKind::uninformed_buy: return "uninformed_buy";
        case MarketEventKind::uninformed_sell: return "uninformed_sell";
    }
    return "?";
}

const char* to_string(TradeKind k) {
    switch (k) {
        case TradeKind::uninformed: return "uninformed";
        case TradeKind::adverse: return "adverse";
        case TradeKind::immediate: return "immediate";
        case TradeKind::unwind: return "unwind";
    }
    return "?";
}

MarketEventStream simulate_market(const ModelParams& params, std::uint64_t seed, double horizon) {
    params.validate();
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_market: horizon must be > 0");
    MarketEventStream out;
    out.seed = seed;
    out.horizon = horizon;

    const auto emit = [&](MarketEventKind kind, double rate, std::uint64_t salt) {
        if (rate <= 0.0) return;
        Rng rng(derive_seed(seed, salt));
        double t = 0.0;
        while (true) {
            t += rng.exponential(rate);
            if (t >= horizon) break;
            out.events.push_back(MarketEvent{t, kind});
        }
    };
    // Jump signs are an independent fair coin on one combined jump clock.
    {
        Rng rng(derive_seed(seed, 0));
        Rng coin(derive_seed(seed, 1));
        if (params.lambda > 0.0) {
            double t = 0.0;
            while (true) {
                t += rng.exponential(params.lambda);
                if (t >= horizon) break;
                out.events.push_back(MarketEvent{
                    t, coin.bernoulli(0.5) ? MarketEventKind::price_up
                                           : MarketEventKind::price_down});
            }
        }
    }
    emit(MarketEventKind::uninformed_buy, params.lambda_plus, 2);
    emit(MarketEventKind::uninformed_sell, params.lambda_minus, 3);

    std::sort(out.events.begin(), out.events.end(), [](const MarketEvent& a, const MarketEvent& b) {
        if (a.t != b.t) return a.t < b.t;
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);  // price moves first
    });
    return out;
}

namespace {

struct RestingOrder {
    bool alive = false;
    std::int64_t limit_ht = 0;
    int period = -1;  // period that placed (or last kept) it
};

struct Book {
    std::int64_t mid2 = 0;  // mid price in half-ticks (even)
    RestingOrder ask, bid;
    std::int64_t best_ask() const { return mid2 + 1; }
    std::int64_t best_bid() const { return mid2 - 1; }
};

class Replay {
  public:
    Replay(const Policy& policy, const StateSpace& space, const MarketEventStream& stream,
           const ModelParams& params, const SimStart& start)
        : policy_(policy), space_(space), stream_(stream), params_(params) {
        res_.start = start;
        res_.quote_path.reserve(policy.actions.size());
        book_.mid2 = 2 * start.price_ticks;
        wealth_ = start.wealth_ht;
        q_ = start.inventory;
        res_.inventory_path.emplace_back(0.0, q_);
    }

    SimResult run() {
        const int N = static_cast<int>(policy_.actions.size());
        for (int i = 0; i < N; ++i) {
            process_until(i * params_.delta_t);
            const ActionPair action = decide(i);
            res_.quote_path.push_back(action);
            process_until(i * params_.delta_t + params_.delta_tau);
            apply(action, i);
        }
        process_until(N * params_.delta_t);  // tail of the last active phase
        process_until(N * params_.delta_t + params_.delta_tau);
        unwind(N * params_.delta_t + params_.delta_tau);
        res_.terminal_wealth_ht = wealth_;
        return std::move(res_);
    }

  private:
    // Applies market events with t < limit (left-limit convention at epochs).
    void process_until(double limit) {
        while (ei_ < stream_.events.size() && stream_.events[ei_].t < limit) {
            const MarketEvent& e = stream_.events[ei_++];
            switch (e.kind) {
                case MarketEventKind::price_up:
                    if (book_.ask.alive && book_.ask.limit_ht == book_.best_ask())
                        fill(Side::ask, book_.ask.limit_ht, TradeKind::adverse, e.t,
                             book_.ask.period);
                    book_.mid2 += 2;
                    break;
                case MarketEventKind::price_down:
                    if (book_.bid.alive && book_.bid.limit_ht == book_.best_bid())
                        fill(Side::bid, book_.bid.limit_ht, TradeKind::adverse, e.t,
                             book_.bid.period);
                    book_.mid2 -= 2;
                    break;
                case MarketEventKind::uninformed_buy:
                    if (book_.ask.alive && book_.ask.limit_ht == book_.best_ask())
                        fill(Side::ask, book_.ask.limit_ht, TradeKind::uninformed, e.t,
                             book_.ask.period);
                    break;
                case MarketEventKind::uninformed_sell:
                    if (book_.bid.alive && book_.bid.limit_ht == book_.best_bid())
                        fill(Side::bid, book_.bid.limit_ht, TradeKind::uninformed, e.t,
                             book_.bid.period);
                    break;
            }
        }
    }

    void fill(Side side, std::int64_t price_ht, TradeKind kind, double t, int period) {
        if (side == Side::ask) {
            wealth_ += price_ht;
            q_ -= 1;
            book_.ask.alive = false;
        } else {
            wealth_ -= price_ht;
            q_ += 1;
            book_.bid.alive = false;
        }
        res_.trades.push_back(Trade{t, side, price_ht, kind, period});
        // Simultaneous boundary executions rebalance atomically; the bound
        // holds for the netted inventory.
        if (!deferred_) {
            check_bounds();
            res_.inventory_path.emplace_back(t, q_);
        }
    }

    void check_bounds() const {
        if (q_ < params_.q_min || q_ > params_.q_max)
            throw std::logic_error("run_policy: inventory bound violated");
    }

    RelPrice rel_of(Side side) {
        const RestingOrder& o = side == Side::ask ? book_.ask : book_.bid;
        if (!o.alive) return RelPrice::pos_inf();
        const std::int64_t diff =
            side == Side::ask ? o.limit_ht - book_.best_ask() : book_.best_bid() - o.limit_ht;
        if (diff < 0 || diff % 2 != 0) throw std::logic_error("run_policy: bad resting price");
        return RelPrice(static_cast<int>(diff / 2));
    }

    ActionPair decide(int i) {
        // Orders drifted past the truncation expire; mirrors the solver's
        // never-fills treatment and keeps the observed state in the space.
        for (Side side : {Side::ask, Side::bid}) {
            RestingOrder& o = side == Side::ask ? book_.ask : book_.bid;
            if (o.alive) {
                const RelPrice r = rel_of(side);
                if (r.is_finite() && r.value() > space_.r_max()) o.alive = false;
            }
        }
        const ReducedState s{q_, rel_of(Side::ask), rel_of(Side::bid)};
        const int idx = space_.index(s);
        if (idx < 0) throw std::logic_error("run_policy: observed state outside the state space");
        const ActionPair a = policy_.actions[static_cast<size_t>(i)][static_cast<size_t>(idx)];
        if (!is_admissible(s, a, params_))
            throw std::logic_error("run_policy: inadmissible action at a reached state");
        pending_mid2_ = book_.mid2;  // decision-time mid prices the new orders
        return a;
    }

    void apply(const ActionPair& action, int i) {
        const double t_arr = i * params_.delta_t + params_.delta_tau;
        const int q_before = q_;
        deferred_ = true;
        apply_leg(Side::ask, action.ask, i, t_arr);
        apply_leg(Side::bid, action.bid, i, t_arr);
        deferred_ = false;
        check_bounds();
        if (q_ != q_before) res_.inventory_path.emplace_back(t_arr, q_);
    }

    void apply_leg(Side side, const ActionLeg& leg, int i, double t_arr) {
        RestingOrder& o = side == Side::ask ? book_.ask : book_.bid;
        if (leg.is_do_nothing()) {
            if (o.alive) o.period = i;
            return;
        }
        o.alive = false;  // cancellation instruction
        const RelPrice p = leg.price();
        if (p.is_pos_inf()) return;
        const std::int64_t touch = side == Side::ask ? book_.best_bid() : book_.best_ask();
        if (p.is_neg_inf()) {
            fill(side, touch, TradeKind::immediate, t_arr, i);
            return;
        }
        const std::int64_t limit = side == Side::ask ? pending_mid2_ + 1 + 2 * p.value()
                                                     : pending_mid2_ - 1 - 2 * p.value();
        const bool marketable = side == Side::ask ? limit <= touch : limit >= touch;
        if (marketable) {
            // Executes against the touch on arrival.
            fill(side, touch, TradeKind::immediate, t_arr, i);
            return;
        }
        o.alive = true;
        o.limit_ht = limit;
        o.period = i;
    }

    void unwind(double t) {
        book_.ask.alive = false;
        book_.bid.alive = false;
        res_.final_state = ReducedState{q_, rel_of(Side::ask), rel_of(Side::bid)};
        if (q_ > 0) {
            res_.trades.push_back(Trade{t, Side::ask, book_.best_bid(), TradeKind::unwind, -1});
            wealth_ += q_ * book_.best_bid();
        } else if (q_ < 0) {
            res_.trades.push_back(Trade{t, Side::bid, book_.best_ask(), TradeKind::unwind, -1});
            wealth_ += q_ * book_.best_ask();
        }
        q_ = 0;
        res_.inventory_path.emplace_back(t, q_);
    }

    const Policy& policy_;
    const StateSpace& space_;
    const MarketEventStream& stream_;
    const ModelParams& params_;
    SimResult res_;
    Book book_;
    std::int64_t wealth_ = 0;
    std::int64_t pending_mid2_ = 0;
    int q_ = 0;
    size_t ei_ = 0;
    bool deferred_ = false;
};

}  // namespace

SimResult run_policy(const Policy& policy, const StateSpace& space,
                     const MarketEventStream& stream, const ModelParams& params,
                     const SimStart& start) {
    params.validate();
    if (start.inventory < params.q_min || start.inventory > params.q_max)
        throw std::invalid_argument("run_policy: start inventory outside bounds");
    return Replay(policy, space, stream, params, start).run();
}

McValue mc_policy_value(const Policy& policy, const StateSpace& space, const ModelParams& params,
                        const SimStart& start, int n_paths, std::uint64_t seed,
                        const SolveOptions& opts) {
    if (n_paths < 2) throw std::invalid_argument("mc_policy_value: n_paths must be >= 2");
    const double horizon =
        static_cast<double>(policy.actions.size()) * params.delta_t + params.delta_tau;
    std::vector<double> wealth(static_cast<size_t>(n_paths));
#ifdef _OPENMP
    if (opts.threads > 0) omp_set_num_threads(opts.threads);
#pragma omp parallel for schedule(dynamic, 64) if (opts.parallel)
#endif
    for (int k = 0; k < n_paths; ++k) {
        const MarketEventStream stream =
            simulate_market(params, derive_seed(seed, static_cast<std::uint64_t>(k) + 1000), horizon);
        const SimResult r = run_policy(policy, space, stream, params, start);
        wealth[static_cast<size_t>(k)] = r.terminal_wealth_ticks();
    }
    double mean = 0.0;
    for (double w : wealth) mean += w;
    mean /= n_paths;
    double var = 0.0;
    for (double w : wealth) var += (w - mean) * (w - mean);
    var /= (n_paths - 1);
    return McValue{mean, std::sqrt(var / n_paths), n_paths};
}

void audit_result(const SimResult& result, const MarketEventStream& stream,
                  const ModelParams& params) {
    const auto fail = [](const std::string& what) { throw std::logic_error("audit: " + what); };
    const int N = static_cast<int>(result.quote_path.size());
    const double t_end = N * params.delta_t + params.delta_tau;

    // Mid path reconstruction and site conditions per trade.
    std::int64_t mid2 = 2 * result.start.price_ticks;
    size_t ei = 0;
    std::int64_t cash = result.start.wealth_ht;
    int q = result.start.inventory;
    for (const Trade& tr : result.trades) {
        while (ei < stream.events.size() && stream.events[ei].t < tr.t) {
            const auto k = stream.events[ei].kind;
            mid2 += k == MarketEventKind::price_up ? 2 : k == MarketEventKind::price_down ? -2 : 0;
            ++ei;
        }
        switch (tr.kind) {
            case TradeKind::uninformed: {
                // must coincide with an uninformed event of its side, at the touch
                bool found = false;
                for (size_t j = ei; j < stream.events.size() && stream.events[j].t == tr.t; ++j) {
                    const auto k = stream.events[j].kind;
                    if ((tr.side == Side::ask && k == MarketEventKind::uninformed_buy) ||
                        (tr.side == Side::bid && k == MarketEventKind::uninformed_sell))
                        found = true;
                }
                if (!found) fail("uninformed trade without a matching arrival");
                const std::int64_t touch = tr.side == Side::ask ? mid2 + 1 : mid2 - 1;
                if (tr.price_ht != touch) fail("uninformed fill away from the touch");
                break;
            }
            case TradeKind::adverse: {
                bool found = false;
                for (size_t j = ei; j < stream.events.size() && stream.events[j].t == tr.t; ++j) {
                    const auto k = stream.events[j].kind;
                    if ((tr.side == Side::ask && k == MarketEventKind::price_up) ||
                        (tr.side == Side::bid && k == MarketEventKind::price_down))
                        found = true;
                }
                if (!found) fail("adverse trade without a crossing jump");
                const std::int64_t touch = tr.side == Side::ask ? mid2 + 1 : mid2 - 1;
                if (tr.price_ht != touch) fail("adverse fill away from the old touch");
                break;
            }
            case TradeKind::immediate: {
                // only at arrival instants
                bool at_arrival = false;
                for (int i = 0; i < N; ++i)
                    if (tr.t == i * params.delta_t + params.delta_tau) {
                        at_arrival = true;
                        if (params.delta_tau == 0.0) {
                            const ActionLeg& leg = tr.side == Side::ask
                                                       ? result.quote_path[static_cast<size_t>(i)].ask
                                                       : result.quote_path[static_cast<size_t>(i)].bid;
                            const bool aggressive =
                                !leg.is_do_nothing() &&
                                (leg.price().is_neg_inf() ||
                                 (leg.price().is_finite() && leg.price().value() <= -1));
                            if (!aggressive) fail("immediate fill without an aggressive leg");
                        }
                    }
                if (!at_arrival) fail("immediate fill away from an arrival instant");
                const std::int64_t touch = tr.side == Side::ask ? mid2 - 1 : mid2 + 1;
                if (tr.price_ht != touch) fail("immediate fill away from the opposite touch");
                break;
            }
            case TradeKind::unwind: {
                if (tr.t != t_end) fail("unwind away from the terminal instant");
                const std::int64_t touch = tr.side == Side::ask ? mid2 - 1 : mid2 + 1;
                if (tr.price_ht != touch) fail("unwind away from the opposite touch");
                break;
            }
        }
        const std::int64_t qty = tr.kind == TradeKind::unwind ? std::abs(q) : 1;
        if (tr.side == Side::ask) {
            cash += qty * tr.price_ht;
            q -= static_cast<int>(qty);
        } else {
            cash -= qty * tr.price_ht;
            q += static_cast<int>(qty);
        }
        // simultaneous boundary executions net out atomically
        const bool group_open = (&tr != &result.trades.back()) && ((&tr)[1].t == tr.t);
        if (!group_open && (q < params.q_min || q > params.q_max))
            fail("inventory bound violated");
    }
    if (q != 0) fail("position not flat after unwind");
    if (cash != result.terminal_wealth_ht) fail("cash ledger does not balance");
    for (const auto& [t, qq] : result.inventory_path)
        if (qq < params.q_min || qq > params.q_max) fail("inventory path outside bounds");
}

}  // namespace lmm
