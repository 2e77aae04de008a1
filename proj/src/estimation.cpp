#include "lmm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lmm/rng.hpp"

namespace lmm {

const char* to_string(InjectionOutcome o) {
    switch (o) {
        case InjectionOutcome::discarded: return "discarded";
        case InjectionOutcome::censored: return "censored";
        case InjectionOutcome::type1: return "type1";
        case InjectionOutcome::type2: return "type2";
    }
    return "?";
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool to_double(const std::string& s, double& v) {
    try {
        size_t pos = 0;
        v = std::stod(s, &pos);
        return pos == s.size() && !s.empty();
    } catch (...) {
        return false;
    }
}

bool to_long(const std::string& s, long& v) {
    try {
        size_t pos = 0;
        v = std::stol(s, &pos);
        return pos == s.size() && !s.empty();
    } catch (...) {
        return false;
    }
}

}  // namespace

LobsterData parse_lobster(const std::string& message_path, const std::string& orderbook_path) {
    std::ifstream msg(message_path), book(orderbook_path);
    if (!msg) throw std::runtime_error("parse_lobster: cannot open " + message_path);
    if (!book) throw std::runtime_error("parse_lobster: cannot open " + orderbook_path);

    LobsterData out;
    std::string mline, bline;
    size_t lineno = 0;
    bool monotone = true;
    while (true) {
        const bool has_m = static_cast<bool>(std::getline(msg, mline));
        const bool has_b = static_cast<bool>(std::getline(book, bline));
        if (has_m != has_b)
            throw std::runtime_error("parse_lobster: message/orderbook row counts differ");
        if (!has_m) break;
        ++lineno;
        if (mline.empty() && bline.empty()) continue;

        const auto mf = split_csv(mline);
        const auto bf = split_csv(bline);
        const auto reject = [&](const std::string& why) {
            out.warnings.push_back("line " + std::to_string(lineno) + " rejected: " + why);
        };
        if (mf.size() < 6) {
            reject("message row needs 6 columns");
            continue;
        }
        if (bf.size() < 4 || bf.size() % 4 != 0) {
            reject("orderbook row needs 4 columns per level");
            continue;
        }
        OrderEvent e;
        long type_l = 0, dir_l = 0;
        BookSnapshot s;
        if (!to_double(mf[0], e.timestamp) || !to_long(mf[1], type_l) ||
            !to_long(mf[2], e.order_id) || !to_long(mf[3], e.size) || !to_long(mf[4], e.price) ||
            !to_long(mf[5], dir_l)) {
            reject("non-numeric message field");
            continue;
        }
        if (!to_long(bf[0], s.best_ask) || !to_long(bf[1], s.ask_size) ||
            !to_long(bf[2], s.best_bid) || !to_long(bf[3], s.bid_size)) {
            reject("non-numeric orderbook field");
            continue;
        }
        if (type_l < 1 || type_l > 7) {
            reject("unknown event type");
            continue;
        }
        if (dir_l != 1 && dir_l != -1) {
            reject("direction must be +-1");
            continue;
        }
        if (e.price <= 0 || s.best_ask <= s.best_bid || s.best_bid <= 0) {
            reject("invalid prices");
            continue;
        }
        e.type = static_cast<OrderEventType>(type_l);
        e.direction = static_cast<int>(dir_l);
        s.timestamp = e.timestamp;
        if (!out.events.empty() && e.timestamp < out.events.back().timestamp) monotone = false;
        out.events.push_back(e);
        out.snapshots.push_back(s);
    }
    if (!monotone) {
        out.warnings.push_back("timestamps not monotone; applying stable sort");
        std::vector<size_t> order(out.events.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return out.events[a].timestamp < out.events[b].timestamp;
        });
        LobsterData sorted;
        sorted.warnings = out.warnings;
        sorted.events.reserve(out.events.size());
        sorted.snapshots.reserve(out.snapshots.size());
        for (size_t i : order) {
            sorted.events.push_back(out.events[i]);
            sorted.snapshots.push_back(out.snapshots[i]);
        }
        return sorted;
    }
    return out;
}

double estimate_lambda(const std::vector<BookSnapshot>& snapshots, long tick_units) {
    if (snapshots.empty()) throw std::invalid_argument("estimate_lambda: no snapshots");
    if (tick_units <= 0) throw std::invalid_argument("estimate_lambda: tick must be > 0");
    long jumps = 0;
    double elapsed = 0.0;
    bool any = false;
    for (size_t i = 1; i < snapshots.size(); ++i) {
        const BookSnapshot& a = snapshots[i - 1];
        const BookSnapshot& b = snapshots[i];
        if (a.spread() != tick_units || b.spread() != tick_units) continue;  // spread filter
        any = true;
        elapsed += b.timestamp - a.timestamp;
        jumps += std::abs(b.mid2() - a.mid2()) / (2 * tick_units);
    }
    if (!any) throw std::runtime_error("estimate_lambda: all rows filtered out");
    if (elapsed <= 0.0) throw std::runtime_error("estimate_lambda: no elapsed time");
    return static_cast<double>(jumps) / (elapsed / 60.0);
}

std::pair<double, double> estimate_uninformed_rates(const std::vector<OrderEvent>& events,
                                                    const std::vector<BookSnapshot>& snapshots,
                                                    bool side_resolved) {
    if (events.empty() || events.size() != snapshots.size())
        throw std::invalid_argument("estimate_uninformed_rates: empty or mismatched inputs");
    const double span = events.back().timestamp - events.front().timestamp;
    if (span <= 0.0) throw std::runtime_error("estimate_uninformed_rates: empty time span");

    long buys = 0, sells = 0;  // market buys hit the ask (resting dir -1)
    const size_t n = events.size();
    for (size_t i = 0; i < n; ++i) {
        if (events[i].type != OrderEventType::execution_visible) continue;
        const double ts = events[i].timestamp;
        const int dir = events[i].direction;
        // One market order = all visible executions sharing (timestamp,
        // direction); only its first row starts a group.
        bool first = true;
        for (size_t b = i; b-- > 0 && events[b].timestamp == ts;)
            if (events[b].type == OrderEventType::execution_visible && events[b].direction == dir) {
                first = false;
                break;
            }
        if (!first) continue;
        size_t last = i;
        for (size_t j = i + 1; j < n && events[j].timestamp == ts; ++j)
            if (events[j].type == OrderEventType::execution_visible && events[j].direction == dir)
                last = j;
        if (i == 0 || last + 1 >= n) continue;  // cannot compare mids at the edges
        if (snapshots[i - 1].mid2() == snapshots[last + 1].mid2()) {
            if (dir == -1)
                ++buys;
            else
                ++sells;
        }
    }
    const double minutes = span / 60.0;
    if (side_resolved) return {buys / minutes, sells / minutes};
    const double half = (buys + sells) / minutes / 2.0;
    return {half, half};
}

ReplayResult replay_artificial_orders(const std::vector<OrderEvent>& events,
                                      const std::vector<BookSnapshot>& snapshots,
                                      const ReplayConfig& config) {
    if (config.latency < 0.0) throw std::invalid_argument("replay: latency must be >= 0");
    if (config.n_orders < 1) throw std::invalid_argument("replay: n_orders must be >= 1");
    if (events.size() != snapshots.size())
        throw std::invalid_argument("replay: events/snapshots mismatch");

    ReplayResult res;
    res.latency = config.latency;
    res.ratio_estimate = std::numeric_limits<double>::quiet_NaN();
    res.insufficient = true;
    res.records.assign(static_cast<size_t>(config.n_orders), InjectionRecord{});
    if (events.empty()) return res;

    const size_t n = events.size();
    std::vector<double> ts(n);
    for (size_t i = 0; i < n; ++i) ts[i] = events[i].timestamp;
    const double t0 = ts.front(), t1 = ts.back();
    if (!(t1 > t0)) return res;

    // Uniform decision times, derived per order for reproducibility.
    std::vector<double> decisions(static_cast<size_t>(config.n_orders));
    {
        Rng rng(derive_seed(config.seed, 77));
        for (auto& d : decisions) d = rng.uniform(t0, t1);
    }

    const bool bid_side = config.side == Side::bid;
    const auto row_at = [&](double t) {
        // last row with timestamp <= t
        const auto it = std::upper_bound(ts.begin(), ts.end(), t);
        return static_cast<std::ptrdiff_t>(it - ts.begin()) - 1;
    };

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
    for (int k = 0; k < config.n_orders; ++k) {
        InjectionRecord rec;
        rec.decision_time = decisions[static_cast<size_t>(k)];
        rec.outcome = InjectionOutcome::discarded;

        const std::ptrdiff_t dec_idx = row_at(rec.decision_time);
        if (dec_idx < 0) {
            res.records[static_cast<size_t>(k)] = rec;
            continue;
        }
        const long mid0 = snapshots[static_cast<size_t>(dec_idx)].mid2();
        const long level = bid_side ? snapshots[static_cast<size_t>(dec_idx)].best_bid
                                    : snapshots[static_cast<size_t>(dec_idx)].best_ask;
        const double arrival = rec.decision_time + config.latency;
        const std::ptrdiff_t arr_idx = row_at(arrival);

        // Only orders whose latency window saw no mid move are considered.
        bool moved = false;
        for (std::ptrdiff_t j = dec_idx + 1; j <= arr_idx; ++j)
            if (snapshots[static_cast<size_t>(j)].mid2() != mid0) {
                moved = true;
                break;
            }
        if (moved) {
            res.records[static_cast<size_t>(k)] = rec;
            continue;
        }

        const long ahead = bid_side ? snapshots[static_cast<size_t>(arr_idx >= 0 ? arr_idx : 0)].bid_size
                                    : snapshots[static_cast<size_t>(arr_idx >= 0 ? arr_idx : 0)].ask_size;
        long cum = 0;
        rec.outcome = InjectionOutcome::censored;
        rec.resolve_time = t1;
        for (size_t j = static_cast<size_t>(arr_idx + 1); j < n; ++j) {
            const long mid = snapshots[j].mid2();
            const bool away = bid_side ? mid > mid0 : mid < mid0;   // left behind
            const bool through = bid_side ? mid < mid0 : mid > mid0;  // traded through
            if (away) {
                rec.outcome = InjectionOutcome::censored;
                rec.resolve_time = events[j].timestamp;
                break;
            }
            const int fill_dir = bid_side ? 1 : -1;
            if (events[j].type == OrderEventType::execution_visible &&
                events[j].direction == fill_dir && events[j].price == level) {
                cum += events[j].size;
                if (cum >= ahead) {
                    // Classify at the first row after this execution group.
                    size_t last = j;
                    size_t m = j + 1;
                    while (m < n && events[m].timestamp == events[j].timestamp) {
                        if (events[m].type == OrderEventType::execution_visible &&
                            events[m].direction == fill_dir)
                            last = m;
                        ++m;
                    }
                    rec.resolve_time = events[j].timestamp;
                    if (last + 1 >= n) {
                        rec.outcome = InjectionOutcome::censored;  // cannot classify
                    } else {
                        const long mid_after = snapshots[last + 1].mid2();
                        const bool moved_through = bid_side ? mid_after < mid0 : mid_after > mid0;
                        rec.outcome = moved_through ? InjectionOutcome::type2
                                                    : InjectionOutcome::type1;
                    }
                    break;
                }
            }
            if (through) {
                // Level consumed or faded through without reaching us: the
                // resting order trades at the move.
                rec.outcome = InjectionOutcome::type2;
                rec.resolve_time = events[j].timestamp;
                break;
            }
        }
        res.records[static_cast<size_t>(k)] = rec;
    }

    for (const auto& r : res.records) {
        switch (r.outcome) {
            case InjectionOutcome::discarded: break;
            case InjectionOutcome::censored: ++res.n_injected; break;
            case InjectionOutcome::type1:
                ++res.n_injected;
                ++res.n_type1;
                break;
            case InjectionOutcome::type2:
                ++res.n_injected;
                ++res.n_type2;
                break;
        }
    }
    res.insufficient = res.n_injected < 30;
    res.ratio_estimate = res.n_type2 > 0
                             ? static_cast<double>(res.n_type1) / res.n_type2
                             : std::numeric_limits<double>::quiet_NaN();
    return res;
}

}  // namespace lmm
