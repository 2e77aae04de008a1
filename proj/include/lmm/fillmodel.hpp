#pragma once

#include <array>
#include <map>
#include <memory>
#include <shared_mutex>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmm/core.hpp"

namespace lmm {

/// How an order left the book within a phase. `immediate` never occurs
/// inside a phase; it is assigned at phase boundaries for marketable
/// arrivals (compose_period / simulator).
enum class FillType : std::int8_t { none = 0, uninformed = 1, adverse = 2, immediate = 3 };

inline bool filled(FillType f) { return f != FillType::none; }
const char* to_string(FillType f);

/// Numerical tolerances and the DP relative-price truncation shared by the
/// kernel builders and the solver.
struct Truncation {
    int r_max = 16;                  // relative prices beyond this map to +inf
    double eps_displacement = 1e-12; // lattice tail for the price walk
    double eps_poisson = 1e-13;      // relative tail of the uniformization series
};

/// Joint law over (ask fill type, bid fill type, displacement) for one
/// sub-period in which the resting orders are held fixed. Fills are
/// correlated only through the shared price path.
struct PhaseKernel {
    double duration = 0.0;
    RelPrice ask_in = RelPrice::pos_inf();
    RelPrice bid_in = RelPrice::pos_inf();
    int K = 0;                 // displacement lattice half-width
    std::vector<double> pmf;   // [fa * 3 + fb] * (2K+1) + (d + K), fa/fb in {none,unf,adv}
    double truncation_error = 0.0;

    double at(FillType fa, FillType fb, int d) const {
        if (d < -K || d > K) return 0.0;
        const auto a = static_cast<int>(fa), b = static_cast<int>(fb);
        return pmf[static_cast<size_t>((a * 3 + b) * (2 * K + 1) + d + K)];
    }
    double fill_prob_ask() const;
    double fill_prob_bid() const;
    std::vector<double> displacement_marginal() const;  // indexed d + K
};

nlohmann::json to_json(const PhaseKernel& k);

/// P(an order resting at `rel_price` is executed within t). Uniformization
/// of the absorbing displacement chain; rejects rel_price = -inf (marketable
/// orders never rest in the book).
double fill_probability(Side side, RelPrice rel_price, double t, const ModelParams& params,
                        const Truncation& trunc = {});

/// (P(uninformed fill within t), P(adverse fill within t)); sums to
/// fill_probability and splits as lambda_side : lambda/2 conditionally.
std::pair<double, double> fill_split(Side side, RelPrice rel_price, double t,
                                     const ModelParams& params, const Truncation& trunc = {});

/// Exact joint kernel for one sub-period with the given resting orders
/// (+inf = absent). duration = 0 yields a point mass at (none, none, 0).
PhaseKernel phase_kernel(RelPrice ask_in, RelPrice bid_in, double duration,
                         const ModelParams& params, const Truncation& trunc = {});

/// Kernel cache keyed by (ask, bid, duration); safe for concurrent readers
/// with single-writer inserts.
class KernelCache {
  public:
    explicit KernelCache(ModelParams params, Truncation trunc = {})
        : params_(std::move(params)), trunc_(trunc) {}

    std::shared_ptr<const PhaseKernel> get(RelPrice ask_in, RelPrice bid_in, double duration);
    size_t size() const;

  private:
    using Key = std::tuple<int, int, double>;  // encoded rel prices + duration
    static int encode(RelPrice r);
    ModelParams params_;
    Truncation trunc_;
    mutable std::shared_mutex mutex_;
    std::map<Key, std::shared_ptr<const PhaseKernel>> cache_;
};

/// Reduced decision-epoch state (q, r+, r-); resting prices are >= 0 or +inf.
struct ReducedState {
    int q = 0;
    RelPrice r_ask = RelPrice::pos_inf();
    RelPrice r_bid = RelPrice::pos_inf();
    friend bool operator==(const ReducedState& a, const ReducedState& b) {
        return a.q == b.q && a.r_ask == b.r_ask && a.r_bid == b.r_bid;
    }
    friend bool operator<(const ReducedState& a, const ReducedState& b);
};

/// One-period transition law of the reduced state under an action: latency
/// phase with the old orders, boundary cancel/replace semantics (marketable
/// arrivals execute immediately), active phase with the surviving orders.
/// Resulting relative prices are clamped to trunc.r_max (mapped to +inf).
std::vector<std::pair<ReducedState, double>> compose_period(const ReducedState& s,
                                                            const ActionPair& action,
                                                            const ModelParams& params,
                                                            const Truncation& trunc,
                                                            KernelCache& cache);

}  // namespace lmm
