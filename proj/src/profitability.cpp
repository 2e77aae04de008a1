#include "lmm/profitability.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace lmm {

const char* to_string(Regime r) {
    switch (r) {
        case Regime::never_profitable: return "never_profitable";
        case Regime::profitable_for_large_n: return "profitable_for_large_n";
        case Regime::indeterminate: return "indeterminate";
    }
    return "?";
}

nlohmann::json to_json(const ProfitabilityReport& r) {
    nlohmann::json j{{"regime", to_string(r.regime)}};
    j["n_min"] = r.n_min ? nlohmann::json(*r.n_min) : nlohmann::json();
    j["n_min_upper"] = r.n_min_upper ? nlohmann::json(*r.n_min_upper) : nlohmann::json();
    if (r.quote_pair) {
        j["quote_pair"] = {{"delta_ask", r.quote_pair->delta_ask},
                           {"delta_bid", r.quote_pair->delta_bid},
                           {"h_ask", r.quote_pair->h_ask},
                           {"h_bid", r.quote_pair->h_bid},
                           {"p_ask", r.quote_pair->p_ask},
                           {"p_bid", r.quote_pair->p_bid}};
    } else {
        j["quote_pair"] = nlohmann::json();
    }
    return j;
}

Regime classify(const ModelParams& params) {
    params.validate();
    const double half = params.lambda / 2.0;
    const bool ask_dead = params.lambda_plus <= half;
    const bool bid_dead = params.lambda_minus <= half;
    if (ask_dead && bid_dead) return Regime::never_profitable;
    if (!ask_dead && !bid_dead) return Regime::profitable_for_large_n;
    return Regime::indeterminate;
}

std::optional<QuotePair> default_quote_pair(const ModelParams& params, int search_limit,
                                            const Truncation& trunc) {
    // Full-period lifetime delta_t: the constructive policy cancels only on
    // the following period, so the fill window carries through the latency.
    const auto ask = best_positive_quote(Side::ask, params.delta_tau, params.delta_t, params,
                                         search_limit, trunc);
    const auto bid = best_positive_quote(Side::bid, params.delta_tau, params.delta_t, params,
                                         search_limit, trunc);
    if (!ask || !bid) return std::nullopt;
    QuotePair qp;
    qp.delta_ask = ask->rel_price;
    qp.delta_bid = bid->rel_price;
    qp.h_ask = ask->value;
    qp.h_bid = bid->value;
    qp.p_ask = fill_probability_with_latency(Side::ask, params.delta_tau, params.delta_t,
                                             RelPrice(qp.delta_ask), params, trunc);
    qp.p_bid = fill_probability_with_latency(Side::bid, params.delta_tau, params.delta_t,
                                             RelPrice(qp.delta_bid), params, trunc);
    return qp;
}

int n_min_bound_formula(double h_ask, double p_ask, double h_bid, double p_bid) {
    const auto side = [](double h, double p) {
        if (!(h > 0.0)) throw std::invalid_argument("n_min_bound_formula: order value must be > 0");
        if (!(p > 0.0) || !(p < 1.0))
            throw std::invalid_argument("n_min_bound_formula: fill probability must be in (0,1)");
        return static_cast<int>(std::ceil(std::log(h / (h + 0.5 * p)) / std::log1p(-p)));
    };
    return 2 * std::max(side(h_ask, p_ask), side(h_bid, p_bid)) + 2;
}

int n_min_upper_bound(const ModelParams& params, const QuotePair& qp) {
    params.validate();
    return n_min_bound_formula(qp.h_ask, qp.p_ask, qp.h_bid, qp.p_bid);
}

std::optional<int> find_n_min(const ModelParams& params, int n_max, const Truncation& trunc,
                              const ActionGrid& grid, const SolveOptions& opts, double tol_pos) {
    if (n_max < 1) throw std::invalid_argument("find_n_min: n_max < 1");
    ModelParams p = params;
    const auto profit_at = [&](int n) {
        p.n_periods_override = n;
        return expected_profit(p, trunc, grid, opts);
    };
    if (!(profit_at(n_max) > tol_pos)) return std::nullopt;
    // P(N) is nondecreasing in N, so the first positive N bisects cleanly.
    int lo = 1, hi = n_max;
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (profit_at(mid) > tol_pos)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

Policy make_theorem3_policy(const ModelParams& params, const QuotePair& qp,
                            const Truncation& trunc) {
    const int N = params.n_periods();
    if (N < 4 || N % 2 != 0)
        throw std::invalid_argument("make_theorem3_policy: N must be even and >= 4");
    StateSpace space(params, trunc);
    const ActionPair null_action{ActionLeg::cancel(), ActionLeg::cancel()};

    Policy pol;
    pol.actions.assign(static_cast<size_t>(N),
                       std::vector<ActionPair>(static_cast<size_t>(space.size()), null_action));
    const auto set = [&](int period, const ReducedState& s, const ActionPair& a) {
        const int idx = space.index(s);
        pol.actions[static_cast<size_t>(period)][static_cast<size_t>(idx)] = a;
    };
    const RelPrice inf = RelPrice::pos_inf();
    set(0, ReducedState{0, inf, inf},
        ActionPair{ActionLeg::quote(qp.delta_ask), ActionLeg::quote(qp.delta_bid)});
    for (int i = 2; i + 2 <= N; i += 2) {
        set(i, ReducedState{1, inf, inf},
            ActionPair{ActionLeg::quote(qp.delta_ask), ActionLeg::cancel()});
        set(i, ReducedState{-1, inf, inf},
            ActionPair{ActionLeg::cancel(), ActionLeg::quote(qp.delta_bid)});
    }
    return pol;
}

double theorem3_closed_form(double h, double p, int n_periods) {
    if (n_periods < 4 || n_periods % 2 != 0)
        throw std::invalid_argument("theorem3_closed_form: N must be even and >= 4");
    const int K = n_periods / 2;
    return (-0.5 - h / p) * std::pow(1.0 - p, K - 1) + h / p;
}

ProfitabilityReport profitability_report(const ModelParams& params, int n_max,
                                         const Truncation& trunc, const ActionGrid& grid,
                                         const SolveOptions& opts, double tol_pos) {
    ProfitabilityReport rep;
    rep.regime = classify(params);
    if (rep.regime == Regime::never_profitable) return rep;
    rep.quote_pair = default_quote_pair(params, grid.delta_max > 0 ? grid.delta_max : 12, trunc);
    if (rep.quote_pair) rep.n_min_upper = n_min_upper_bound(params, *rep.quote_pair);
    rep.n_min = find_n_min(params, n_max, trunc, grid, opts, tol_pos);
    return rep;
}

}  // namespace lmm
