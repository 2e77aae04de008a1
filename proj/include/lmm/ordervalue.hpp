#pragma once

#include <optional>

#include "lmm/core.hpp"
#include "lmm/fillmodel.hpp"

namespace lmm {

/// Query for the value of a single order: sent on time-0 information,
/// confirmed after t1, compared against the mid-price at t1 + t2.
struct OrderValueQuery {
    Side side = Side::ask;
    double t1 = 0.0;  // latency window (s)
    double t2 = 0.0;  // active window (s)
    RelPrice rel_price;
};

/// Zero-delay order value in ticks: edge_per_fill * fill probability for
/// resting prices, -0.5 for marketable ones, 0 for an absent order.
double order_value_zero_delay(Side side, RelPrice rel_price, double t2, const ModelParams& params,
                              const Truncation& trunc = {});

/// Order value with latency t1: the zero-delay value averaged over the
/// displacement of the mid-price during the latency window.
double order_value(Side side, double t1, double t2, RelPrice rel_price, const ModelParams& params,
                   const Truncation& trunc = {});

inline double order_value(const OrderValueQuery& q, const ModelParams& params,
                          const Truncation& trunc = {}) {
    return order_value(q.side, q.t1, q.t2, q.rel_price, params, trunc);
}

/// Per-period value of the orders a leg controls: the outstanding order for
/// the latency window plus the fresh quote for the rest of the period, or
/// the outstanding order for the whole period when doing nothing.
double h_act(Side side, RelPrice r_out, const ActionLeg& leg, const ModelParams& params,
             const Truncation& trunc = {});

/// P(the order is filled within [t1, t1 + t2)), averaging over the latency
/// displacement; marketable-on-arrival counts as filled.
double fill_probability_with_latency(Side side, double t1, double t2, RelPrice rel_price,
                                     const ModelParams& params, const Truncation& trunc = {});

struct QuoteValue {
    int rel_price = 0;
    double value = 0.0;      // ticks
    double fill_prob = 0.0;  // over the t2 window (t1 = 0 component mix)
};

/// Best strictly positive-value quote over the scanned relative prices
/// ([0, limit] with t1 = 0, [-2, limit] otherwise); ties resolve toward the
/// smaller price. Returns nullopt when no scanned quote has positive value;
/// warns on stderr if the scan was exhausted while lambda_side > lambda/2.
std::optional<QuoteValue> best_positive_quote(Side side, double t1, double t2,
                                              const ModelParams& params, int search_limit = 12,
                                              const Truncation& trunc = {});

}  // namespace lmm
