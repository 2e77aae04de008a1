#include "lmm/ordervalue.hpp"

#include <cmath>
#include <iostream>

namespace lmm {

double order_value_zero_delay(Side side, RelPrice rel_price, double t2, const ModelParams& params,
                              const Truncation& trunc) {
    if (!(t2 > 0.0)) throw std::invalid_argument("order_value_zero_delay: t2 must be > 0");
    if (rel_price.is_pos_inf()) return 0.0;  // never fills
    if (rel_price.is_neg_inf() || rel_price.value() < 0) return -0.5;  // fills instantly at touch
    const double edge =
        edge_per_fill(params.lambda, side == Side::ask ? params.lambda_plus : params.lambda_minus);
    return edge * fill_probability(side, rel_price, t2, params, trunc);
}

double order_value(Side side, double t1, double t2, RelPrice rel_price, const ModelParams& params,
                   const Truncation& trunc) {
    if (t1 < 0.0) throw std::invalid_argument("order_value: t1 must be >= 0");
    if (rel_price.is_pos_inf()) return 0.0;
    if (rel_price.is_neg_inf()) return -0.5;  // market order, martingale mid
    if (t1 == 0.0) return order_value_zero_delay(side, rel_price, t2, params, trunc);

    // Quote perturbed by the latency-window displacement: ask quotes drift
    // down relative to the book when the price rises, bids mirror.
    const PriceIncrementDist law = price_increment_dist(params.lambda, t1, trunc.eps_displacement);
    const int x = rel_price.value();
    double v = 0.0;
    for (int k = -law.support_k; k <= law.support_k; ++k) {
        const double p = law.at(k);
        if (p == 0.0) continue;
        const int shifted = side == Side::ask ? x - k : x + k;
        v += p * order_value_zero_delay(side, RelPrice(shifted), t2, params, trunc);
    }
    return v;
}

double h_act(Side side, RelPrice r_out, const ActionLeg& leg, const ModelParams& params,
             const Truncation& trunc) {
    if (r_out.is_neg_inf() || (r_out.is_finite() && r_out.value() < 0))
        throw std::invalid_argument("h_act: outstanding relative price must be >= 0 or +inf");
    if (leg.is_do_nothing()) {
        if (r_out.is_pos_inf()) return 0.0;
        return order_value(side, 0.0, params.delta_t, r_out, params, trunc);
    }
    double v = 0.0;
    if (!r_out.is_pos_inf() && params.delta_tau > 0.0)
        v += order_value(side, 0.0, params.delta_tau, r_out, params, trunc);
    const double active = params.delta_t - params.delta_tau;
    if (leg.price().is_pos_inf()) return v;
    if (leg.price().is_neg_inf()) return v - 0.5;
    return v + order_value(side, params.delta_tau, active, leg.price(), params, trunc);
}

double fill_probability_with_latency(Side side, double t1, double t2, RelPrice rel_price,
                                     const ModelParams& params, const Truncation& trunc) {
    if (t1 < 0.0 || t2 < 0.0) throw std::invalid_argument("fill_probability_with_latency: t < 0");
    if (rel_price.is_pos_inf()) return 0.0;
    if (rel_price.is_neg_inf()) return 1.0;
    if (t1 == 0.0) {
        if (rel_price.value() < 0) return 1.0;
        return fill_probability(side, rel_price, t2, params, trunc);
    }
    const PriceIncrementDist law = price_increment_dist(params.lambda, t1, trunc.eps_displacement);
    const int x = rel_price.value();
    double p = 0.0;
    for (int k = -law.support_k; k <= law.support_k; ++k) {
        const double w = law.at(k);
        if (w == 0.0) continue;
        const int shifted = side == Side::ask ? x - k : x + k;
        p += w * (shifted < 0 ? 1.0
                              : fill_probability(side, RelPrice(shifted), t2, params, trunc));
    }
    return p;
}

std::optional<QuoteValue> best_positive_quote(Side side, double t1, double t2,
                                              const ModelParams& params, int search_limit,
                                              const Truncation& trunc) {
    if (search_limit < 1) throw std::invalid_argument("best_positive_quote: search_limit < 1");
    // With latency, small negative quotes can land non-marketable.
    const int lo = t1 == 0.0 ? 0 : -2;
    std::optional<QuoteValue> best;
    for (int x = lo; x <= search_limit; ++x) {
        const double v = order_value(side, t1, t2, RelPrice(x), params, trunc);
        if (v > 0.0 && (!best || v > best->value)) {
            best = QuoteValue{
                x, v, fill_probability_with_latency(side, t1, t2, RelPrice(x), params, trunc)};
        }
    }
    const double lam_side = side == Side::ask ? params.lambda_plus : params.lambda_minus;
    if (!best && lam_side > params.lambda / 2.0)
        std::cerr << "best_positive_quote: no positive value up to " << search_limit
                  << " but lambda_" << to_string(side)
                  << " > lambda/2; consider raising search_limit\n";
    return best;
}

}  // namespace lmm
