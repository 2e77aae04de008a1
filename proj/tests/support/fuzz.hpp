#pragma once

#include "lmm/dpsolver.hpp"
#include "lmm/rng.hpp"

namespace lmm::test {

/// Uniformly random admissible action per (period, state).
inline Policy random_policy(const StateSpace& space, const ModelParams& params,
                            const ActionGrid& grid, int n_periods, Rng& rng) {
    std::vector<std::vector<ActionPair>> per_state;
    per_state.reserve(static_cast<size_t>(space.size()));
    for (int s = 0; s < space.size(); ++s)
        per_state.push_back(admissible_actions(space.state(s), params, grid));
    Policy pol;
    pol.actions.resize(static_cast<size_t>(n_periods));
    for (auto& row : pol.actions) {
        row.resize(static_cast<size_t>(space.size()));
        for (int s = 0; s < space.size(); ++s) {
            const auto& opts = per_state[static_cast<size_t>(s)];
            row[static_cast<size_t>(s)] = opts[rng.next_u64() % opts.size()];
        }
    }
    return pol;
}

}  // namespace lmm::test
