#include "lmm/dpsolver.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lmm/ordervalue.hpp"

namespace lmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Tie-break rank: do-nothing, quotes by |delta| (positive first), cancel, market.
long leg_rank(const ActionLeg& leg) {
    if (leg.is_do_nothing()) return 0;
    const RelPrice p = leg.price();
    if (p.is_pos_inf()) return std::numeric_limits<long>::max() - 1;
    if (p.is_neg_inf()) return std::numeric_limits<long>::max();
    const long k = p.value();
    return 1 + 2 * std::abs(k) + (k < 0 ? 1 : 0);
}

enum class BoundClass : std::int8_t { interior, lower, upper };

BoundClass classify(const ReducedState& s, const ModelParams& p) {
    if (s.q == p.q_min) return BoundClass::lower;
    if (s.q == p.q_max) return BoundClass::upper;
    if (p.delta_tau > 0.0) {
        // With latency a live order plus a fresh quote can fill twice in one
        // period, so the adjacent inventory levels are boundary states too.
        if (s.q == p.q_min + 1 && s.r_ask.is_finite()) return BoundClass::lower;
        if (s.q == p.q_max - 1 && s.r_bid.is_finite()) return BoundClass::upper;
    }
    return BoundClass::interior;
}

bool leg_allowed(BoundClass c, const ActionLeg& ask, const ActionLeg& bid) {
    switch (c) {
        case BoundClass::interior: return true;
        case BoundClass::lower:
            return (ask.is_do_nothing() || ask.price().is_pos_inf()) ||
                   (!bid.is_do_nothing() && bid.price().is_neg_inf());
        case BoundClass::upper:
            return (bid.is_do_nothing() || bid.price().is_pos_inf()) ||
                   (!ask.is_do_nothing() && ask.price().is_neg_inf());
    }
    return false;
}

}  // namespace

std::vector<ActionLeg> ActionGrid::legs() const {
    if (delta_min > delta_max) throw std::invalid_argument("ActionGrid: delta_min > delta_max");
    std::vector<ActionLeg> out;
    out.push_back(ActionLeg::nothing());
    for (int k = delta_min; k <= delta_max; ++k) out.push_back(ActionLeg::quote(k));
    out.push_back(ActionLeg::cancel());
    out.push_back(ActionLeg::market());
    std::sort(out.begin(), out.end(),
              [](const ActionLeg& a, const ActionLeg& b) { return leg_rank(a) < leg_rank(b); });
    return out;
}

StateSpace::StateSpace(const ModelParams& params, const Truncation& trunc)
    : q_min_(params.q_min), q_max_(params.q_max), r_max_(trunc.r_max) {
    params.validate();
    if (r_max_ < 1) throw std::invalid_argument("StateSpace: r_max must be >= 1");
    const int R = r_codes();
    const int nq = q_max_ - q_min_ + 1;
    index_.assign(static_cast<size_t>(nq) * R * R, -1);
    for (int q = q_min_; q <= q_max_; ++q)
        for (int ra = 0; ra < R; ++ra)
            for (int rb = 0; rb < R; ++rb) {
                if (q == q_min_ && ra != R - 1) continue;  // forced r+ = inf
                if (q == q_max_ && rb != R - 1) continue;  // forced r- = inf
                ReducedState s{q, decode(ra), decode(rb)};
                index_[(static_cast<size_t>(q - q_min_) * R + ra) * R + rb] =
                    static_cast<int>(states_.size());
                states_.push_back(s);
            }
}

int StateSpace::code(RelPrice r) const {
    if (r.is_pos_inf()) return r_max_ + 1;
    if (r.is_neg_inf() || r.value() < 0)
        throw std::invalid_argument("StateSpace: resting price must be >= 0 or +inf");
    if (r.value() > r_max_) return r_max_ + 1;  // truncation: far orders count as absent
    return r.value();
}

RelPrice StateSpace::decode(int c) const {
    return c == r_max_ + 1 ? RelPrice::pos_inf() : RelPrice(c);
}

int StateSpace::index(const ReducedState& s) const {
    if (s.q < q_min_ || s.q > q_max_) return -1;
    const int R = r_codes();
    return index_[(static_cast<size_t>(s.q - q_min_) * R + code(s.r_ask)) * R + code(s.r_bid)];
}

bool is_admissible(const ReducedState& s, const ActionPair& a, const ModelParams& params) {
    return leg_allowed(classify(s, params), a.ask, a.bid);
}

std::vector<ActionPair> admissible_actions(const ReducedState& s, const ModelParams& params,
                                           const ActionGrid& grid) {
    const auto legs = grid.legs();
    const BoundClass c = classify(s, params);
    std::vector<ActionPair> out;
    for (const auto& la : legs)
        for (const auto& lb : legs)
            if (leg_allowed(c, la, lb)) out.push_back(ActionPair{la, lb});
    return out;
}

double terminal_g(const ReducedState& s, const ModelParams& params, const Truncation& trunc) {
    if (s.q < params.q_min || s.q > params.q_max)
        throw std::invalid_argument("terminal_g: inventory outside bounds");
    if (params.delta_tau == 0.0) return -0.5 * std::abs(s.q);
    double v = 0.0;
    if (s.r_ask.is_finite())
        v += order_value(Side::ask, 0.0, params.delta_tau, s.r_ask, params, trunc);
    if (s.r_bid.is_finite())
        v += order_value(Side::bid, 0.0, params.delta_tau, s.r_bid, params, trunc);
    const PhaseKernel k = phase_kernel(s.r_ask, s.r_bid, params.delta_tau, params, trunc);
    double pen = 0.0;
    for (int a = 0; a <= 2; ++a)
        for (int b = 0; b <= 2; ++b)
            for (int d = -k.K; d <= k.K; ++d) {
                const double p = k.at(static_cast<FillType>(a), static_cast<FillType>(b), d);
                if (p != 0.0) pen += p * std::abs(s.q - (a != 0 ? 1 : 0) + (b != 0 ? 1 : 0));
            }
    return v - 0.5 * pen;
}

namespace {

struct KEntry {
    double p;
    std::int16_t d;
    std::int8_t a, b;
};

struct BMap {
    std::int16_t x;    // entry relative-price code after the boundary
    std::int8_t imm;   // marketable on arrival
};

// Backward-induction engine. Per stage it factors the expectation through
// the mid-period configuration (q, entry prices): W holds the phase-2
// expectation of g_{i+1}, and the state/action loop folds the latency-phase
// kernel and boundary semantics over W.
class Engine {
  public:
    Engine(const ModelParams& params, const Truncation& trunc, std::vector<ActionLeg> legs,
           const SolveOptions& opts)
        : params_(params), trunc_(trunc), legs_(std::move(legs)), opts_(opts),
          space_(params, trunc) {
        params_.validate();
        for (const auto& l : legs_)
            if (!l.is_do_nothing() && l.price().is_finite() && l.price().value() > trunc_.r_max)
                throw std::invalid_argument("backward_solve: r_max smaller than a grid quote");
        build();
    }

    const StateSpace& space() const { return space_; }
    SolveDiagnostics diagnostics() const { return diag_; }
    int n_legs() const { return static_cast<int>(legs_.size()); }
    const std::vector<ActionLeg>& legs() const { return legs_; }

    int leg_index(const ActionLeg& leg) const {
        for (size_t i = 0; i < legs_.size(); ++i)
            if (legs_[i] == leg) return static_cast<int>(i);
        throw std::invalid_argument("Engine: action leg not covered by the leg set");
    }

    std::vector<double> terminal_dense() const {
        std::vector<double> g(dense_size(), kNaN);
        for (int si = 0; si < space_.size(); ++si) {
            const ReducedState& s = space_.state(si);
            const int ra = space_.code(s.r_ask), rb = space_.code(s.r_bid);
            double pen = 0.0;
            for (const KEntry& e : p1_[static_cast<size_t>(ra * R_ + rb)])
                pen += e.p * std::abs(s.q - (e.a != 0 ? 1 : 0) + (e.b != 0 ? 1 : 0));
            g[did(s.q - space_.q_min(), ra, rb)] =
                hterm_ask_[static_cast<size_t>(ra)] + hterm_bid_[static_cast<size_t>(rb)] -
                0.5 * pen;
        }
        return g;
    }

    // One backward stage: gnext = g_{i+1} dense, returns g_i dense. In
    // maximize mode fills pol_out (one pair of leg indices per state);
    // otherwise follows pol_in.
    std::vector<double> step(const std::vector<double>& gnext,
                             std::vector<std::pair<int, int>>* pol_out,
                             const std::vector<std::pair<int, int>>* pol_in) {
        build_w(gnext);
        std::vector<double> gout(dense_size(), kNaN);
        const int n = space_.size();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (opts_.parallel)
#endif
        for (int si = 0; si < n; ++si) {
            const ReducedState& s = space_.state(si);
            const int ra = space_.code(s.r_ask), rb = space_.code(s.r_bid);
            const auto& plist = p1_[static_cast<size_t>(ra * R_ + rb)];
            double best = -std::numeric_limits<double>::infinity();
            std::pair<int, int> best_pair{-1, -1};
            if (pol_in) {
                const auto pr = (*pol_in)[static_cast<size_t>(si)];
                best = action_value(s, ra, rb, plist, pr.first, pr.second);
                best_pair = pr;
            } else {
                for (const auto& pr : pairs_for(s)) {
                    const double v = action_value(s, ra, rb, plist, pr.first, pr.second);
                    if (v > best) {
                        best = v;
                        best_pair = pr;
                    }
                }
            }
            gout[did(s.q - space_.q_min(), ra, rb)] = best;
            if (pol_out) (*pol_out)[static_cast<size_t>(si)] = best_pair;
        }
        return gout;
    }

    double dense_at(const std::vector<double>& g, const ReducedState& s) const {
        return g[did(s.q - space_.q_min(), space_.code(s.r_ask), space_.code(s.r_bid))];
    }

    std::vector<double> to_rows(const std::vector<double>& gdense) const {
        std::vector<double> row(static_cast<size_t>(space_.size()));
        for (int si = 0; si < space_.size(); ++si)
            row[static_cast<size_t>(si)] = dense_at(gdense, space_.state(si));
        return row;
    }

    // Aborts (throws) if any admissible action can reach a configuration
    // outside the state space; runs once per solve.
    void check_reachability(const std::vector<std::pair<int, int>>* pol_in) const {
        for (int si = 0; si < space_.size(); ++si) {
            const ReducedState& s = space_.state(si);
            const int ra = space_.code(s.r_ask), rb = space_.code(s.r_bid);
            const auto& plist = p1_[static_cast<size_t>(ra * R_ + rb)];
            const auto check_pair = [&](int la, int lb) {
                for (const KEntry& e : plist) {
                    if (e.p <= 0.0) continue;
                    const int qm = s.q - (e.a != 0 ? 1 : 0) + (e.b != 0 ? 1 : 0);
                    const BMap ma = resolve_ask(la, ra, e);
                    const BMap mb = resolve_bid(lb, rb, e);
                    const int q2 = qm - ma.imm + mb.imm;
                    const bool ask_live = ma.x != inf_code();
                    const bool bid_live = mb.x != inf_code();
                    if (q2 < params_.q_min || q2 > params_.q_max ||
                        (ask_live && q2 == params_.q_min) || (bid_live && q2 == params_.q_max)) {
                        std::ostringstream os;
                        os << "dpsolver: action (" << legs_[static_cast<size_t>(la)].str() << ","
                           << legs_[static_cast<size_t>(lb)].str() << ") at state (q=" << s.q
                           << ",r+=" << s.r_ask.str() << ",r-=" << s.r_bid.str()
                           << ") reaches inventory " << q2 << " outside bounds";
                        throw std::logic_error(os.str());
                    }
                }
            };
            if (pol_in) {
                const auto pr = (*pol_in)[static_cast<size_t>(si)];
                check_pair(pr.first, pr.second);
            } else {
                for (const auto& pr : pairs_for(s)) check_pair(pr.first, pr.second);
            }
        }
    }

    double hact(Side side, int r_code, int leg) const {
        const auto& t = side == Side::ask ? hact_ask_ : hact_bid_;
        return t[static_cast<size_t>(r_code) * legs_.size() + static_cast<size_t>(leg)];
    }

  private:
    size_t dense_size() const {
        return static_cast<size_t>(params_.q_max - params_.q_min + 1) * R_ * R_;
    }
    size_t did(int qi, int ra, int rb) const {
        return (static_cast<size_t>(qi) * R_ + static_cast<size_t>(ra)) * R_ +
               static_cast<size_t>(rb);
    }
    int inf_code() const { return trunc_.r_max + 1; }
    int clamp_code(int x) const { return x > trunc_.r_max ? inf_code() : x; }

    BMap resolve_ask(int la, int ra, const KEntry& e) const {
        if (leg_is_dn_[static_cast<size_t>(la)]) {
            if (e.a != 0 || ra == inf_code()) return BMap{static_cast<std::int16_t>(inf_code()), 0};
            return BMap{dn_ask_[static_cast<size_t>(ra) * w1_ + static_cast<size_t>(e.d + K1_)], 0};
        }
        return amap_[static_cast<size_t>(la) * w1_ + static_cast<size_t>(e.d + K1_)];
    }
    BMap resolve_bid(int lb, int rb, const KEntry& e) const {
        if (leg_is_dn_[static_cast<size_t>(lb)]) {
            if (e.b != 0 || rb == inf_code()) return BMap{static_cast<std::int16_t>(inf_code()), 0};
            return BMap{dn_bid_[static_cast<size_t>(rb) * w1_ + static_cast<size_t>(e.d + K1_)], 0};
        }
        return bmap_[static_cast<size_t>(lb) * w1_ + static_cast<size_t>(e.d + K1_)];
    }

    double action_value(const ReducedState& s, int ra, int rb, const std::vector<KEntry>& plist,
                        int la, int lb) const {
        double acc = 0.0;
        for (const KEntry& e : plist) {
            const int qm = s.q - (e.a != 0 ? 1 : 0) + (e.b != 0 ? 1 : 0);
            const BMap ma = resolve_ask(la, ra, e);
            const BMap mb = resolve_bid(lb, rb, e);
            const int qi = qm - ma.imm + mb.imm - params_.q_min;
            acc += e.p * w_[(static_cast<size_t>(qi) * R_ + static_cast<size_t>(ma.x)) * R_ +
                            static_cast<size_t>(mb.x)];
        }
        return acc + hact(Side::ask, ra, la) + hact(Side::bid, rb, lb);
    }

    const std::vector<std::pair<int, int>>& pairs_for(const ReducedState& s) const {
        switch (classify(s, params_)) {
            case BoundClass::lower: return pairs_lower_;
            case BoundClass::upper: return pairs_upper_;
            case BoundClass::interior: break;
        }
        return pairs_interior_;
    }

    static std::vector<KEntry> sparsify(const PhaseKernel& k) {
        std::vector<KEntry> out;
        for (int a = 0; a <= 2; ++a)
            for (int b = 0; b <= 2; ++b)
                for (int d = -k.K; d <= k.K; ++d) {
                    const double p = k.at(static_cast<FillType>(a), static_cast<FillType>(b), d);
                    if (p > 1e-200)
                        out.push_back(KEntry{p, static_cast<std::int16_t>(d),
                                             static_cast<std::int8_t>(a),
                                             static_cast<std::int8_t>(b)});
                }
        return out;
    }

    void build() {
#ifdef _OPENMP
        if (opts_.threads > 0) omp_set_num_threads(opts_.threads);
#endif
        R_ = space_.r_codes();
        const int R = R_;
        const double t1 = params_.delta_tau;
        const double t2 = params_.delta_t - params_.delta_tau;

        // Phase kernels for every resting-order pair.
        p1_.resize(static_cast<size_t>(R) * R);
        p2_.resize(static_cast<size_t>(R) * R);
        double max_trunc = 0.0;
        int k1 = 0, k2 = 0;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(dynamic) if (opts_.parallel) \
    reduction(max : max_trunc, k1, k2)
#endif
        for (int ra = 0; ra < R; ++ra)
            for (int rb = 0; rb < R; ++rb) {
                const PhaseKernel ka =
                    phase_kernel(space_.decode(ra), space_.decode(rb), t1, params_, trunc_);
                const PhaseKernel kb =
                    phase_kernel(space_.decode(ra), space_.decode(rb), t2, params_, trunc_);
                p1_[static_cast<size_t>(ra * R + rb)] = sparsify(ka);
                p2_[static_cast<size_t>(ra * R + rb)] = sparsify(kb);
                max_trunc = std::max(max_trunc, std::max(ka.truncation_error, kb.truncation_error));
                k1 = std::max(k1, ka.K);
                k2 = std::max(k2, kb.K);
            }
        K1_ = k1;
        K2_ = k2;
        w1_ = static_cast<size_t>(2 * K1_ + 1);
        diag_.state_count = space_.size();
        diag_.lattice_latency = K1_;
        diag_.lattice_active = K2_;
        diag_.max_kernel_truncation = max_trunc;

        build_h_tables(t1, t2);
        build_boundary_maps();
        build_pair_lists();
        w_.assign(dense_size(), kNaN);
    }

    void build_h_tables(double t1, double t2) {
        const int L = static_cast<int>(legs_.size());
        const auto edge = [this](Side side) {
            const double ls = side == Side::ask ? params_.lambda_plus : params_.lambda_minus;
            return (ls + params_.lambda / 2.0) == 0.0 ? 0.0 : edge_per_fill(params_.lambda, ls);
        };
        const double ea = edge(Side::ask), eb = edge(Side::bid);

        int max_quote = 0;
        for (const auto& l : legs_)
            if (!l.is_do_nothing() && l.price().is_finite())
                max_quote = std::max(max_quote, l.price().value());
        const int xmax = std::max(trunc_.r_max, max_quote + K1_) + 1;

        // Single-order fill probabilities per duration.
        const auto fp_table = [&](Side side, double t, int n) {
            std::vector<double> v(static_cast<size_t>(n + 1), 0.0);
            for (int x = 0; x <= n; ++x)
                v[static_cast<size_t>(x)] =
                    t > 0.0 ? fill_probability(side, RelPrice(x), t, params_, trunc_) : 0.0;
            return v;
        };
        const auto fpa_t2 = fp_table(Side::ask, t2, xmax);
        const auto fpb_t2 = fp_table(Side::bid, t2, xmax);
        const auto fpa_dt = fp_table(Side::ask, params_.delta_t, trunc_.r_max);
        const auto fpb_dt = fp_table(Side::bid, params_.delta_t, trunc_.r_max);
        const auto fpa_tau = fp_table(Side::ask, t1, trunc_.r_max);
        const auto fpb_tau = fp_table(Side::bid, t1, trunc_.r_max);

        hterm_ask_.assign(static_cast<size_t>(R_), 0.0);
        hterm_bid_.assign(static_cast<size_t>(R_), 0.0);
        for (int r = 0; r <= trunc_.r_max; ++r) {
            hterm_ask_[static_cast<size_t>(r)] = ea * fpa_tau[static_cast<size_t>(r)];
            hterm_bid_[static_cast<size_t>(r)] = eb * fpb_tau[static_cast<size_t>(r)];
        }

        // Fresh-quote values H(t1, t2, delta): zero-delay value averaged over
        // the latency displacement.
        const PriceIncrementDist law =
            price_increment_dist(params_.lambda, t1, trunc_.eps_displacement);
        const auto h_new = [&](Side side, const RelPrice& p) {
            if (p.is_pos_inf()) return 0.0;
            if (p.is_neg_inf()) return -0.5;
            const auto& fp = side == Side::ask ? fpa_t2 : fpb_t2;
            const double e = side == Side::ask ? ea : eb;
            const int x = p.value();
            double v = 0.0;
            for (int k = -law.support_k; k <= law.support_k; ++k) {
                const double w = law.at(k);
                if (w == 0.0) continue;
                const int shifted = side == Side::ask ? x - k : x + k;
                v += w * (shifted < 0 ? -0.5 : e * fp[static_cast<size_t>(shifted)]);
            }
            return v;
        };

        hact_ask_.assign(static_cast<size_t>(R_) * L, 0.0);
        hact_bid_.assign(static_cast<size_t>(R_) * L, 0.0);
        for (int r = 0; r < R_; ++r)
            for (int l = 0; l < L; ++l) {
                const ActionLeg& leg = legs_[static_cast<size_t>(l)];
                double va, vb;
                if (leg.is_do_nothing()) {
                    va = r <= trunc_.r_max ? ea * fpa_dt[static_cast<size_t>(r)] : 0.0;
                    vb = r <= trunc_.r_max ? eb * fpb_dt[static_cast<size_t>(r)] : 0.0;
                } else {
                    const double base_a = r <= trunc_.r_max ? hterm_ask_[static_cast<size_t>(r)] : 0.0;
                    const double base_b = r <= trunc_.r_max ? hterm_bid_[static_cast<size_t>(r)] : 0.0;
                    va = base_a + h_new(Side::ask, leg.price());
                    vb = base_b + h_new(Side::bid, leg.price());
                }
                hact_ask_[static_cast<size_t>(r) * L + static_cast<size_t>(l)] = va;
                hact_bid_[static_cast<size_t>(r) * L + static_cast<size_t>(l)] = vb;
            }
    }

    void build_boundary_maps() {
        const int L = static_cast<int>(legs_.size());
        const auto inf16 = static_cast<std::int16_t>(inf_code());
        amap_.assign(static_cast<size_t>(L) * w1_, BMap{inf16, 0});
        bmap_.assign(static_cast<size_t>(L) * w1_, BMap{inf16, 0});
        leg_is_dn_.assign(static_cast<size_t>(L), 0);
        for (int l = 0; l < L; ++l) {
            const ActionLeg& leg = legs_[static_cast<size_t>(l)];
            if (leg.is_do_nothing()) {
                leg_is_dn_[static_cast<size_t>(l)] = 1;
                continue;
            }
            for (int d = -K1_; d <= K1_; ++d) {
                BMap ma{inf16, 0}, mb{inf16, 0};
                const RelPrice p = leg.price();
                if (p.is_neg_inf()) {
                    ma.imm = mb.imm = 1;
                } else if (p.is_finite()) {
                    const int xa = p.value() - d;
                    if (xa < 0)
                        ma.imm = 1;
                    else
                        ma.x = static_cast<std::int16_t>(clamp_code(xa));
                    const int xb = p.value() + d;
                    if (xb < 0)
                        mb.imm = 1;
                    else
                        mb.x = static_cast<std::int16_t>(clamp_code(xb));
                }
                amap_[static_cast<size_t>(l) * w1_ + static_cast<size_t>(d + K1_)] = ma;
                bmap_[static_cast<size_t>(l) * w1_ + static_cast<size_t>(d + K1_)] = mb;
            }
        }
        // Survival maps for do-nothing legs. A live ask implies d <= r, so
        // r - d >= 0; entries violating that are never consulted.
        dn_ask_.assign(static_cast<size_t>(R_) * w1_, inf16);
        dn_bid_.assign(static_cast<size_t>(R_) * w1_, inf16);
        for (int r = 0; r <= trunc_.r_max; ++r)
            for (int d = -K1_; d <= K1_; ++d) {
                if (r - d >= 0)
                    dn_ask_[static_cast<size_t>(r) * w1_ + static_cast<size_t>(d + K1_)] =
                        static_cast<std::int16_t>(clamp_code(r - d));
                if (r + d >= 0)
                    dn_bid_[static_cast<size_t>(r) * w1_ + static_cast<size_t>(d + K1_)] =
                        static_cast<std::int16_t>(clamp_code(r + d));
            }
    }

    void build_pair_lists() {
        const int L = static_cast<int>(legs_.size());
        for (int la = 0; la < L; ++la)
            for (int lb = 0; lb < L; ++lb) {
                const auto& a = legs_[static_cast<size_t>(la)];
                const auto& b = legs_[static_cast<size_t>(lb)];
                pairs_interior_.emplace_back(la, lb);
                if (leg_allowed(BoundClass::lower, a, b)) pairs_lower_.emplace_back(la, lb);
                if (leg_allowed(BoundClass::upper, a, b)) pairs_upper_.emplace_back(la, lb);
            }
    }

    // W[qm, xa, xb] = E[g_{i+1}] over the active phase, for the mid-period
    // configuration after the boundary. Combinations that could breach the
    // inventory bounds are never produced by admissible actions; they stay NaN.
    void build_w(const std::vector<double>& gnext) {
        const int nq = params_.q_max - params_.q_min + 1;
        const int R = R_;
        const int total = nq * R * R;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (opts_.parallel)
#endif
        for (int flat = 0; flat < total; ++flat) {
            const int qi = flat / (R * R);
            const int xa = (flat / R) % R;
            const int xb = flat % R;
            const int q = params_.q_min + qi;
            const bool ask_live = xa != inf_code();
            const bool bid_live = xb != inf_code();
            if ((ask_live && q == params_.q_min) || (bid_live && q == params_.q_max)) {
                w_[static_cast<size_t>(flat)] = kNaN;
                continue;
            }
            double acc = 0.0;
            for (const KEntry& e : p2_[static_cast<size_t>(xa * R + xb)]) {
                const int q2 = q - (e.a != 0 ? 1 : 0) + (e.b != 0 ? 1 : 0);
                const int ra2 = (!ask_live || e.a != 0) ? inf_code() : clamp_code(xa - e.d);
                const int rb2 = (!bid_live || e.b != 0) ? inf_code() : clamp_code(xb + e.d);
                acc += e.p * gnext[did(q2 - params_.q_min, ra2, rb2)];
            }
            w_[static_cast<size_t>(flat)] = acc;
        }
    }

    ModelParams params_;
    Truncation trunc_;
    std::vector<ActionLeg> legs_;
    SolveOptions opts_;
    StateSpace space_;
    SolveDiagnostics diag_;
    int R_ = 0, K1_ = 0, K2_ = 0;
    size_t w1_ = 1;
    std::vector<std::vector<KEntry>> p1_, p2_;
    std::vector<double> hact_ask_, hact_bid_, hterm_ask_, hterm_bid_;
    std::vector<BMap> amap_, bmap_;
    std::vector<std::int16_t> dn_ask_, dn_bid_;
    std::vector<std::int8_t> leg_is_dn_;
    std::vector<std::pair<int, int>> pairs_interior_, pairs_lower_, pairs_upper_;
    std::vector<double> w_;
};

ActionPair pair_from_indices(const std::vector<ActionLeg>& legs, std::pair<int, int> pr) {
    return ActionPair{legs[static_cast<size_t>(pr.first)], legs[static_cast<size_t>(pr.second)]};
}

}  // namespace

double Solution::expected_profit() const {
    const int idx = space.index(ReducedState{0, RelPrice::pos_inf(), RelPrice::pos_inf()});
    return surface.g.front()[static_cast<size_t>(idx)];
}

Solution backward_solve(const ModelParams& params, const Truncation& trunc,
                        const ActionGrid& grid, const SolveOptions& opts) {
    const int N = params.n_periods();
    if (N < 0) throw std::invalid_argument("backward_solve: negative period count");
    Engine eng(params, trunc, grid.legs(), opts);
    eng.check_reachability(nullptr);

    Solution sol{eng.space(), {}, {}, eng.diagnostics()};
    sol.surface.g.resize(static_cast<size_t>(N) + 1);
    sol.policy.actions.resize(static_cast<size_t>(N));

    std::vector<double> gdense = eng.terminal_dense();
    sol.surface.g[static_cast<size_t>(N)] = eng.to_rows(gdense);
    const int n_states = eng.space().size();
    std::vector<std::pair<int, int>> pol_row(static_cast<size_t>(n_states));
    for (int i = N - 1; i >= 0; --i) {
        gdense = eng.step(gdense, &pol_row, nullptr);
        sol.surface.g[static_cast<size_t>(i)] = eng.to_rows(gdense);
        auto& actions = sol.policy.actions[static_cast<size_t>(i)];
        actions.resize(static_cast<size_t>(n_states));
        for (int si = 0; si < n_states; ++si)
            actions[static_cast<size_t>(si)] =
                pair_from_indices(eng.legs(), pol_row[static_cast<size_t>(si)]);
    }
    return sol;
}

ValueSurface evaluate_policy(const Policy& policy, const ModelParams& params,
                             const Truncation& trunc, const SolveOptions& opts) {
    const int N = static_cast<int>(policy.actions.size());
    // Leg set: everything the policy uses plus the specials.
    std::vector<ActionLeg> legs = ActionGrid{0, 0}.legs();
    const auto add_leg = [&legs](const ActionLeg& l) {
        for (const auto& k : legs)
            if (k == l) return;
        legs.push_back(l);
    };
    for (const auto& row : policy.actions)
        for (const auto& a : row) {
            add_leg(a.ask);
            add_leg(a.bid);
        }
    Engine eng(params, trunc, legs, opts);
    const int n_states = eng.space().size();

    std::vector<std::vector<std::pair<int, int>>> rows(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) {
        const auto& row = policy.actions[static_cast<size_t>(i)];
        if (static_cast<int>(row.size()) != n_states)
            throw std::invalid_argument("evaluate_policy: policy row size mismatch");
        rows[static_cast<size_t>(i)].resize(static_cast<size_t>(n_states));
        for (int si = 0; si < n_states; ++si) {
            const ReducedState& s = eng.space().state(si);
            const ActionPair& a = row[static_cast<size_t>(si)];
            if (!is_admissible(s, a, params))
                throw std::invalid_argument("evaluate_policy: inadmissible action at (q=" +
                                            std::to_string(s.q) + ",r+=" + s.r_ask.str() +
                                            ",r-=" + s.r_bid.str() + ")");
            rows[static_cast<size_t>(i)][static_cast<size_t>(si)] = {eng.leg_index(a.ask),
                                                                     eng.leg_index(a.bid)};
        }
        eng.check_reachability(&rows[static_cast<size_t>(i)]);
    }

    ValueSurface out;
    out.g.resize(static_cast<size_t>(N) + 1);
    std::vector<double> gdense = eng.terminal_dense();
    out.g[static_cast<size_t>(N)] = eng.to_rows(gdense);
    for (int i = N - 1; i >= 0; --i) {
        gdense = eng.step(gdense, nullptr, &rows[static_cast<size_t>(i)]);
        out.g[static_cast<size_t>(i)] = eng.to_rows(gdense);
    }
    return out;
}

double expected_profit(const ModelParams& params, const Truncation& trunc, const ActionGrid& grid,
                       const SolveOptions& opts) {
    const int N = params.n_periods();
    if (N < 0) throw std::invalid_argument("expected_profit: negative period count");
    Engine eng(params, trunc, grid.legs(), opts);
    eng.check_reachability(nullptr);
    std::vector<double> gdense = eng.terminal_dense();
    for (int i = 0; i < N; ++i) gdense = eng.step(gdense, nullptr, nullptr);
    return eng.dense_at(gdense, ReducedState{0, RelPrice::pos_inf(), RelPrice::pos_inf()});
}

std::vector<double> profit_curve(const ModelParams& params, int n_max, const Truncation& trunc,
                                 const ActionGrid& grid, const SolveOptions& opts) {
    if (n_max < 0) throw std::invalid_argument("profit_curve: n_max < 0");
    Engine eng(params, trunc, grid.legs(), opts);
    eng.check_reachability(nullptr);
    const ReducedState start{0, RelPrice::pos_inf(), RelPrice::pos_inf()};
    std::vector<double> out;
    out.reserve(static_cast<size_t>(n_max) + 1);
    std::vector<double> gdense = eng.terminal_dense();
    out.push_back(eng.dense_at(gdense, start));
    for (int m = 1; m <= n_max; ++m) {
        gdense = eng.step(gdense, nullptr, nullptr);
        out.push_back(eng.dense_at(gdense, start));
    }
    return out;
}

Solution backward_solve_reference(const ModelParams& params, const Truncation& trunc,
                                  const ActionGrid& grid) {
    const int N = params.n_periods();
    if (N < 0) throw std::invalid_argument("backward_solve_reference: negative period count");
    StateSpace space(params, trunc);
    KernelCache cache(params, trunc);
    const int n_states = space.size();

    // Transition law and one-period reward per (state, admissible action).
    struct Arm {
        ActionPair action;
        double reward;
        std::vector<std::pair<int, double>> next;  // state index, probability
    };
    std::vector<std::vector<Arm>> arms(static_cast<size_t>(n_states));
    for (int si = 0; si < n_states; ++si) {
        const ReducedState& s = space.state(si);
        for (const ActionPair& a : admissible_actions(s, params, grid)) {
            Arm arm;
            arm.action = a;
            arm.reward = h_act(Side::ask, s.r_ask, a.ask, params, trunc) +
                         h_act(Side::bid, s.r_bid, a.bid, params, trunc);
            for (const auto& [ns, p] : compose_period(s, a, params, trunc, cache)) {
                const int ni = space.index(ns);
                if (ni < 0)
                    throw std::logic_error("backward_solve_reference: transition leaves space");
                arm.next.emplace_back(ni, p);
            }
            arms[static_cast<size_t>(si)].push_back(std::move(arm));
        }
    }

    Solution sol{space, {}, {}, SolveDiagnostics{n_states, 0, 0, 0.0}};
    sol.surface.g.resize(static_cast<size_t>(N) + 1);
    sol.policy.actions.resize(static_cast<size_t>(N));
    auto& gN = sol.surface.g[static_cast<size_t>(N)];
    gN.resize(static_cast<size_t>(n_states));
    for (int si = 0; si < n_states; ++si)
        gN[static_cast<size_t>(si)] = terminal_g(space.state(si), params, trunc);

    for (int i = N - 1; i >= 0; --i) {
        auto& gi = sol.surface.g[static_cast<size_t>(i)];
        auto& pol = sol.policy.actions[static_cast<size_t>(i)];
        gi.resize(static_cast<size_t>(n_states));
        pol.resize(static_cast<size_t>(n_states));
        const auto& gnext = sol.surface.g[static_cast<size_t>(i) + 1];
        for (int si = 0; si < n_states; ++si) {
            double best = -std::numeric_limits<double>::infinity();
            const Arm* best_arm = nullptr;
            for (const Arm& arm : arms[static_cast<size_t>(si)]) {
                double v = arm.reward;
                for (const auto& [ni, p] : arm.next) v += p * gnext[static_cast<size_t>(ni)];
                if (v > best) {
                    best = v;
                    best_arm = &arm;
                }
            }
            gi[static_cast<size_t>(si)] = best;
            pol[static_cast<size_t>(si)] = best_arm->action;
        }
    }
    return sol;
}

}  // namespace lmm
