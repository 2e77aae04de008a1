#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lmm/core.hpp"
#include "lmm/fillmodel.hpp"

namespace lmm {

/// Candidate quote levels for each action leg; cancel (+inf), market (-inf)
/// and do-nothing are always part of the action set.
struct ActionGrid {
    int delta_min = -2;
    int delta_max = 10;

    /// All legs in tie-break preference order: do-nothing, then quotes by
    /// ascending |delta| (positive before negative), then cancel, then market.
    std::vector<ActionLeg> legs() const;
};

/// Enumeration of the truncated reduced state space: q in [q_min, q_max],
/// r+- in {0..r_max} u {+inf}, with r+ = +inf forced at q_min and r- = +inf
/// forced at q_max.
class StateSpace {
  public:
    StateSpace(const ModelParams& params, const Truncation& trunc);

    int size() const { return static_cast<int>(states_.size()); }
    const ReducedState& state(int idx) const { return states_[static_cast<size_t>(idx)]; }
    const std::vector<ReducedState>& states() const { return states_; }

    /// Index of a state, or -1 if it is not a member.
    int index(const ReducedState& s) const;

    int q_min() const { return q_min_; }
    int q_max() const { return q_max_; }
    int r_max() const { return r_max_; }

    /// Relative prices are coded 0..r_max, with r_max + 1 for +inf.
    int r_codes() const { return r_max_ + 2; }
    int code(RelPrice r) const;
    RelPrice decode(int code) const;

  private:
    int q_min_, q_max_, r_max_;
    std::vector<ReducedState> states_;
    std::vector<int> index_;  // dense (q, ra_code, rb_code) -> state idx or -1
};

/// g_i tables, one row per period i = 0..N; row values are in ticks and
/// indexed by StateSpace state index.
struct ValueSurface {
    std::vector<std::vector<double>> g;
};

/// Argmax (or prescribed) actions for periods 0..N-1, indexed like the
/// surface rows.
struct Policy {
    std::vector<std::vector<ActionPair>> actions;
    int n_periods() const { return static_cast<int>(actions.size()); }
};

struct SolveOptions {
    bool parallel = true;
    int threads = 0;  // 0 = runtime default
};

struct SolveDiagnostics {
    int state_count = 0;
    int lattice_latency = 0;       // displacement half-width, latency phase
    int lattice_active = 0;        // displacement half-width, active phase
    double max_kernel_truncation = 0.0;
};

struct Solution {
    StateSpace space;
    ValueSurface surface;
    Policy policy;
    SolveDiagnostics diag;

    /// g_0(0, +inf, +inf): expected profit of the optimal strategy.
    double expected_profit() const;
};

/// Eq.-style boundary sets: admissible action pairs for a state, in
/// tie-break order. Interior states get the full grid product; states at
/// (or, with latency, one fill away from) an inventory bound lose the legs
/// that could push the inventory out.
std::vector<ActionPair> admissible_actions(const ReducedState& s, const ModelParams& params,
                                           const ActionGrid& grid = {});
bool is_admissible(const ReducedState& s, const ActionPair& a, const ModelParams& params);

/// Terminal reduced value: outstanding-order values over the last latency
/// window minus the expected unwind penalty 0.5 E|q - 1fill+ + 1fill-|.
double terminal_g(const ReducedState& s, const ModelParams& params, const Truncation& trunc = {});

/// Backward induction over the truncated reduced state space (OpenMP
/// parallel across states within a stage).
Solution backward_solve(const ModelParams& params, const Truncation& trunc = {},
                        const ActionGrid& grid = {}, const SolveOptions& opts = {});

/// Naive serial reference: per-(state, action) kernel chaining via
/// compose_period, no per-stage factorization. Only suitable for small
/// horizons; kept as the comparison oracle for backward_solve.
Solution backward_solve_reference(const ModelParams& params, const Truncation& trunc = {},
                                  const ActionGrid& grid = {});

/// Value surface of a fixed admissible policy (same kernel machinery, no
/// maximization). Throws if any stored action is inadmissible.
ValueSurface evaluate_policy(const Policy& policy, const ModelParams& params,
                             const Truncation& trunc = {}, const SolveOptions& opts = {});

/// g_0(0, +inf, +inf) for the optimal policy.
double expected_profit(const ModelParams& params, const Truncation& trunc = {},
                       const ActionGrid& grid = {}, const SolveOptions& opts = {});

/// P(N) for N = 0..n_max from one backward pass (the per-period operator is
/// stationary, so the pass visits every horizon on the way).
std::vector<double> profit_curve(const ModelParams& params, int n_max,
                                 const Truncation& trunc = {}, const ActionGrid& grid = {},
                                 const SolveOptions& opts = {});

}  // namespace lmm
