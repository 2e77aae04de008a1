#pragma once

#include <optional>

#include "lmm/core.hpp"
#include "lmm/dpsolver.hpp"
#include "lmm/ordervalue.hpp"

#include <nlohmann/json_fwd.hpp>

namespace lmm {

enum class Regime : std::int8_t { never_profitable, profitable_for_large_n, indeterminate };

const char* to_string(Regime r);

/// Quote pair used by the constructive two-period policy: relative prices
/// with positive full-period values H(delta_tau, delta_t, .) and the fill
/// probabilities of that full-period event (latency carry included).
struct QuotePair {
    int delta_ask = 0;
    int delta_bid = 0;
    double h_ask = 0.0;
    double h_bid = 0.0;
    double p_ask = 0.0;
    double p_bid = 0.0;
};

struct ProfitabilityReport {
    Regime regime = Regime::indeterminate;
    std::optional<int> n_min;
    std::optional<int> n_min_upper;
    std::optional<QuotePair> quote_pair;
};

nlohmann::json to_json(const ProfitabilityReport& r);

/// never_profitable iff both lambda+- <= lambda/2; profitable_for_large_n
/// iff both are strictly larger; indeterminate otherwise.
Regime classify(const ModelParams& params);

/// Both sides' best positive quote at (delta_tau, delta_t), with full-period
/// order values and fill probabilities. nullopt unless both sides admit a
/// positive-value quote within the search limit.
std::optional<QuotePair> default_quote_pair(const ModelParams& params, int search_limit = 12,
                                            const Truncation& trunc = {});

/// The explicit even upper bound for N_min built from a positive-value quote
/// pair: 2 max(ceil(ln(h/(h+p/2))/ln(1-p)) per side) + 2.
int n_min_bound_formula(double h_ask, double p_ask, double h_bid, double p_bid);
int n_min_upper_bound(const ModelParams& params, const QuotePair& qp);

/// Smallest N <= n_max with expected_profit(N) > tol_pos, by binary search
/// (monotone in N); nullopt when even n_max is not profitable.
std::optional<int> find_n_min(const ModelParams& params, int n_max, const Truncation& trunc = {},
                              const ActionGrid& grid = {}, const SolveOptions& opts = {},
                              double tol_pos = 1e-9);

/// The constructive policy: quote both sides once, then alternate
/// cancel-everything periods with one-sided requotes driven by the inventory
/// sign. Requires an even N >= 4. Unreached states get the null action.
Policy make_theorem3_policy(const ModelParams& params, const QuotePair& qp,
                            const Truncation& trunc = {});

/// Closed-form value of the constructive policy at inventory +-1 seen from
/// period 2: (-0.5 - h/p)(1-p)^(K-1) + h/p with N = 2K.
double theorem3_closed_form(double h, double p, int n_periods);

ProfitabilityReport profitability_report(const ModelParams& params, int n_max,
                                         const Truncation& trunc = {}, const ActionGrid& grid = {},
                                         const SolveOptions& opts = {}, double tol_pos = 1e-9);

}  // namespace lmm
