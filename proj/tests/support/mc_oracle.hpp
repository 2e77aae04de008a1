#pragma once

#include <cstdint>
#include <map>
#include <tuple>

#include "lmm/core.hpp"
#include "lmm/fillmodel.hpp"

namespace lmm::test {

struct McStat {
    double mean = 0.0;
    double se = 0.0;
    long n = 0;
};

/// Direct event-driven simulation of the order-value expectation: execution
/// price offset against the window-end mid, zero when unfilled.
McStat mc_order_value(Side side, double t1, double t2, RelPrice rel, const ModelParams& params,
                      long n_paths, std::uint64_t seed);

struct McFill {
    double p_fill = 0.0;
    double se = 0.0;
    double p_uninformed = 0.0;
    double p_adverse = 0.0;
    long n = 0;
};

/// Fill probability and type split of a resting order over [0, t).
McFill mc_fill(Side side, int rel, double t, const ModelParams& params, long n_paths,
               std::uint64_t seed);

/// Joint (ask fill, bid fill, displacement) counts for one phase; fills are
/// correlated through the shared simulated price path.
std::map<std::tuple<int, int, int>, long> mc_phase_counts(RelPrice ask_in, RelPrice bid_in,
                                                          double duration,
                                                          const ModelParams& params, long n_paths,
                                                          std::uint64_t seed);

/// Full two-phase period simulation of the reduced state transition under an
/// action (cancel/replace at the boundary, marketable arrivals fill).
std::map<std::tuple<int, int, int>, long> mc_compose_counts(const ReducedState& s,
                                                            const ActionPair& action,
                                                            const ModelParams& params,
                                                            const Truncation& trunc, long n_paths,
                                                            std::uint64_t seed);

}  // namespace lmm::test
