#include "lmm/fillmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <tuple>

#include <nlohmann/json.hpp>

namespace lmm {

const char* to_string(FillType f) {
    switch (f) {
        case FillType::none: return "none";
        case FillType::uninformed: return "uninformed";
        case FillType::adverse: return "adverse";
        case FillType::immediate: return "immediate";
    }
    return "?";
}

double PhaseKernel::fill_prob_ask() const {
    double p = 0.0;
    for (int a = 1; a <= 2; ++a)
        for (int b = 0; b <= 2; ++b)
            for (int d = -K; d <= K; ++d)
                p += at(static_cast<FillType>(a), static_cast<FillType>(b), d);
    return p;
}

double PhaseKernel::fill_prob_bid() const {
    double p = 0.0;
    for (int a = 0; a <= 2; ++a)
        for (int b = 1; b <= 2; ++b)
            for (int d = -K; d <= K; ++d)
                p += at(static_cast<FillType>(a), static_cast<FillType>(b), d);
    return p;
}

std::vector<double> PhaseKernel::displacement_marginal() const {
    std::vector<double> m(static_cast<size_t>(2 * K + 1), 0.0);
    for (int a = 0; a <= 2; ++a)
        for (int b = 0; b <= 2; ++b)
            for (int d = -K; d <= K; ++d)
                m[static_cast<size_t>(d + K)] +=
                    at(static_cast<FillType>(a), static_cast<FillType>(b), d);
    return m;
}

nlohmann::json to_json(const PhaseKernel& k) {
    nlohmann::json cells = nlohmann::json::array();
    for (int a = 0; a <= 2; ++a)
        for (int b = 0; b <= 2; ++b)
            for (int d = -k.K; d <= k.K; ++d) {
                const double p = k.at(static_cast<FillType>(a), static_cast<FillType>(b), d);
                if (p > 0.0)
                    cells.push_back({{"ask_fill", to_string(static_cast<FillType>(a))},
                                     {"bid_fill", to_string(static_cast<FillType>(b))},
                                     {"d", d},
                                     {"p", p}});
            }
    return nlohmann::json{{"duration", k.duration},
                          {"ask_in", k.ask_in.str()},
                          {"bid_in", k.bid_in.str()},
                          {"K", k.K},
                          {"truncation_error", k.truncation_error},
                          {"pmf", std::move(cells)}};
}

namespace {

// Lattice half-width so that P(jump count > K) < eps over the phase.
int pick_halfwidth(double mu, double eps) {
    if (mu <= 0.0) return 1;
    if (mu > 500.0) {
        // exp(-mu) underflows; a 12-sigma Chernoff margin is far below any
        // eps this code is run with.
        return static_cast<int>(std::ceil(mu + 12.0 * std::sqrt(mu) + 24.0));
    }
    int K = 0;
    double term = std::exp(-mu);
    double cdf = term;
    while (1.0 - cdf > eps) {
        ++K;
        term *= mu / K;
        cdf += term;
        if (K > 200000) throw std::runtime_error("fillmodel: lattice halfwidth runaway");
    }
    return std::max(K, 1);
}

void check_rel(RelPrice r, const char* who) {
    if (r.is_neg_inf())
        throw std::invalid_argument(std::string(who) +
                                    ": relative price -inf never rests in the book");
    if (r.is_finite() && r.value() < 0)
        throw std::invalid_argument(std::string(who) + ": resting relative price must be >= 0");
}

}  // namespace

// Joint absorbing chain over (displacement, ask status, bid status).
// While an order's side is alive at its level (d == r_ask for the ask,
// d == -r_bid for the bid) it absorbs uninformed at its side rate; the
// crossing jump (up through the ask, down through the bid) absorbs adverse.
// Price transitions stay active after fills so the end-of-phase displacement
// is exact. Transient probabilities by uniformization with adaptive
// Poisson-term truncation; lattice exits collect in a sink counted in
// truncation_error.
PhaseKernel phase_kernel(RelPrice ask_in, RelPrice bid_in, double duration,
                         const ModelParams& params, const Truncation& trunc) {
    check_rel(ask_in, "phase_kernel(ask)");
    check_rel(bid_in, "phase_kernel(bid)");
    if (duration < 0.0) throw std::invalid_argument("phase_kernel: negative duration");

    const bool has_ask = ask_in.is_finite();
    const bool has_bid = bid_in.is_finite();
    const double lam = params.lambda;
    const double lam_a = has_ask ? params.lambda_plus : 0.0;
    const double lam_b = has_bid ? params.lambda_minus : 0.0;

    PhaseKernel k;
    k.duration = duration;
    k.ask_in = ask_in;
    k.bid_in = bid_in;

    const double rate = lam + lam_a + lam_b;
    if (duration == 0.0 || rate == 0.0) {
        k.K = 0;
        k.pmf.assign(9, 0.0);
        k.pmf[0] = 1.0;  // (none, none, d = 0)
        return k;
    }

    const int K = pick_halfwidth(lam * duration, trunc.eps_displacement);
    k.K = K;
    const int nd = 2 * K + 1;
    const int n_states = 9 * nd;
    const auto idx = [nd, K](int sa, int sb, int d) { return (sa * 3 + sb) * nd + (d + K); };

    const double big = rate * duration;
    if (big > 600.0) throw std::runtime_error("phase_kernel: uniformization rate*t too large");

    const double pu = (lam / 2.0) / rate;   // up jump
    const double pd = (lam / 2.0) / rate;   // down jump
    const double pa = lam_a / rate;         // uninformed buy arrival
    const double pb = lam_b / rate;         // uninformed sell arrival
    const int ra = has_ask ? ask_in.value() : 0;
    const int rb = has_bid ? bid_in.value() : 0;

    std::vector<double> v(static_cast<size_t>(n_states), 0.0);
    std::vector<double> vn(static_cast<size_t>(n_states), 0.0);
    std::vector<double> out(static_cast<size_t>(n_states), 0.0);
    double sink = 0.0, out_sink = 0.0;
    v[static_cast<size_t>(idx(0, 0, 0))] = 1.0;

    double w = std::exp(-big);  // Poisson weight, n = 0
    double acc = 0.0;
    const double target = 1.0 - trunc.eps_poisson;
    int n = 0;
    while (acc < target) {
        for (int i = 0; i < n_states; ++i)
            if (v[static_cast<size_t>(i)] != 0.0) out[static_cast<size_t>(i)] += w * v[static_cast<size_t>(i)];
        out_sink += w * sink;
        acc += w;
        if (acc >= target) break;

        // One DTMC step of the uniformized chain.
        std::fill(vn.begin(), vn.end(), 0.0);
        double sink_n = sink;  // sink is absorbing
        for (int sa = 0; sa < 3; ++sa)
            for (int sb = 0; sb < 3; ++sb)
                for (int d = -K; d <= K; ++d) {
                    const double m = v[static_cast<size_t>(idx(sa, sb, d))];
                    if (m == 0.0) continue;
                    const bool ask_live = has_ask && sa == 0;
                    const bool bid_live = has_bid && sb == 0;

                    // up jump: crosses the ask when leaving d == ra
                    {
                        const int sa2 = (ask_live && d == ra) ? 2 : sa;
                        if (d + 1 > K)
                            sink_n += m * pu;
                        else
                            vn[static_cast<size_t>(idx(sa2, sb, d + 1))] += m * pu;
                    }
                    // down jump: crosses the bid when leaving d == -rb
                    {
                        const int sb2 = (bid_live && d == -rb) ? 2 : sb;
                        if (d - 1 < -K)
                            sink_n += m * pd;
                        else
                            vn[static_cast<size_t>(idx(sa, sb2, d - 1))] += m * pd;
                    }
                    // uninformed arrivals fill only at the order's level
                    if (pa > 0.0) {
                        if (ask_live && d == ra)
                            vn[static_cast<size_t>(idx(1, sb, d))] += m * pa;
                        else
                            vn[static_cast<size_t>(idx(sa, sb, d))] += m * pa;
                    }
                    if (pb > 0.0) {
                        if (bid_live && d == -rb)
                            vn[static_cast<size_t>(idx(sa, 1, d))] += m * pb;
                        else
                            vn[static_cast<size_t>(idx(sa, sb, d))] += m * pb;
                    }
                }
        v.swap(vn);
        sink = sink_n;
        ++n;
        w *= big / n;
        if (n > 2000000) throw std::runtime_error("phase_kernel: uniformization runaway");
    }

    k.pmf = std::move(out);
    k.truncation_error = out_sink + (1.0 - acc);
    return k;
}

double fill_probability(Side side, RelPrice rel_price, double t, const ModelParams& params,
                        const Truncation& trunc) {
    check_rel(rel_price, "fill_probability");
    if (t < 0.0) throw std::invalid_argument("fill_probability: negative t");
    if (rel_price.is_pos_inf() || t == 0.0) return 0.0;
    const auto k = side == Side::ask
                       ? phase_kernel(rel_price, RelPrice::pos_inf(), t, params, trunc)
                       : phase_kernel(RelPrice::pos_inf(), rel_price, t, params, trunc);
    return side == Side::ask ? k.fill_prob_ask() : k.fill_prob_bid();
}

std::pair<double, double> fill_split(Side side, RelPrice rel_price, double t,
                                     const ModelParams& params, const Truncation& trunc) {
    check_rel(rel_price, "fill_split");
    if (t < 0.0) throw std::invalid_argument("fill_split: negative t");
    if (rel_price.is_pos_inf() || t == 0.0) return {0.0, 0.0};
    const auto k = side == Side::ask
                       ? phase_kernel(rel_price, RelPrice::pos_inf(), t, params, trunc)
                       : phase_kernel(RelPrice::pos_inf(), rel_price, t, params, trunc);
    double unf = 0.0, adv = 0.0;
    for (int other_s = 0; other_s <= 2; ++other_s)
        for (int d = -k.K; d <= k.K; ++d) {
            if (side == Side::ask) {
                unf += k.at(FillType::uninformed, static_cast<FillType>(other_s), d);
                adv += k.at(FillType::adverse, static_cast<FillType>(other_s), d);
            } else {
                unf += k.at(static_cast<FillType>(other_s), FillType::uninformed, d);
                adv += k.at(static_cast<FillType>(other_s), FillType::adverse, d);
            }
        }
    return {unf, adv};
}

int KernelCache::encode(RelPrice r) {
    if (r.is_pos_inf()) return std::numeric_limits<int>::max();
    return r.value();
}

std::shared_ptr<const PhaseKernel> KernelCache::get(RelPrice ask_in, RelPrice bid_in,
                                                    double duration) {
    const Key key{encode(ask_in), encode(bid_in), duration};
    {
        std::shared_lock lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    auto built = std::make_shared<const PhaseKernel>(
        phase_kernel(ask_in, bid_in, duration, params_, trunc_));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = cache_.emplace(key, std::move(built));
    return it->second;
}

size_t KernelCache::size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
}

bool operator<(const ReducedState& a, const ReducedState& b) {
    const auto code = [](RelPrice r) {
        return r.is_pos_inf() ? std::numeric_limits<int>::max() : r.value();
    };
    const auto ka = std::make_tuple(a.q, code(a.r_ask), code(a.r_bid));
    const auto kb = std::make_tuple(b.q, code(b.r_ask), code(b.r_bid));
    return ka < kb;
}

namespace {

// Entry relative price for the phase after the action boundary.
// Returns (order present, rel price, filled immediately at the boundary).
struct BoundaryLeg {
    bool present = false;
    int rel = 0;
    bool immediate = false;
};

BoundaryLeg boundary_leg(Side side, const ActionLeg& leg, RelPrice resting, FillType phase1_fill,
                         int d1, int r_max) {
    BoundaryLeg out;
    const int drift = side == Side::ask ? -d1 : d1;
    if (leg.is_do_nothing()) {
        if (resting.is_finite() && phase1_fill == FillType::none) {
            const int x = resting.value() + drift;
            if (x < 0) throw std::logic_error("boundary_leg: live order below the quote");
            if (x <= r_max) {
                out.present = true;
                out.rel = x;
            }
        }
        return out;
    }
    const RelPrice p = leg.price();
    if (p.is_pos_inf()) return out;  // cancel without replacing
    if (p.is_neg_inf()) {            // market order
        out.immediate = true;
        return out;
    }
    const int x = p.value() + drift;
    if (x < 0) {
        out.immediate = true;  // marketable on arrival
        return out;
    }
    if (x <= r_max) {
        out.present = true;
        out.rel = x;
    }
    return out;
}

}  // namespace

std::vector<std::pair<ReducedState, double>> compose_period(const ReducedState& s,
                                                            const ActionPair& action,
                                                            const ModelParams& params,
                                                            const Truncation& trunc,
                                                            KernelCache& cache) {
    check_rel(s.r_ask, "compose_period(r_ask)");
    check_rel(s.r_bid, "compose_period(r_bid)");
    if (s.q < params.q_min || s.q > params.q_max)
        throw std::invalid_argument("compose_period: inventory outside bounds");

    const auto p1 = cache.get(s.r_ask, s.r_bid, params.delta_tau);
    std::map<ReducedState, double> acc_map;

    for (int a1 = 0; a1 <= 2; ++a1)
        for (int b1 = 0; b1 <= 2; ++b1)
            for (int d1 = -p1->K; d1 <= p1->K; ++d1) {
                const double pr1 =
                    p1->at(static_cast<FillType>(a1), static_cast<FillType>(b1), d1);
                if (pr1 == 0.0) continue;

                const auto ask_leg = boundary_leg(Side::ask, action.ask, s.r_ask,
                                                  static_cast<FillType>(a1), d1, trunc.r_max);
                const auto bid_leg = boundary_leg(Side::bid, action.bid, s.r_bid,
                                                  static_cast<FillType>(b1), d1, trunc.r_max);
                const int qm = s.q - (a1 != 0) + (b1 != 0) - (ask_leg.immediate ? 1 : 0) +
                               (bid_leg.immediate ? 1 : 0);

                const RelPrice xa =
                    ask_leg.present ? RelPrice(ask_leg.rel) : RelPrice::pos_inf();
                const RelPrice xb =
                    bid_leg.present ? RelPrice(bid_leg.rel) : RelPrice::pos_inf();
                const auto p2 = cache.get(xa, xb, params.delta_t - params.delta_tau);

                for (int a2 = 0; a2 <= 2; ++a2)
                    for (int b2 = 0; b2 <= 2; ++b2)
                        for (int d2 = -p2->K; d2 <= p2->K; ++d2) {
                            const double pr2 = p2->at(static_cast<FillType>(a2),
                                                      static_cast<FillType>(b2), d2);
                            if (pr2 == 0.0) continue;
                            ReducedState ns;
                            ns.q = qm - (a2 != 0) + (b2 != 0);
                            if (ns.q < params.q_min || ns.q > params.q_max)
                                throw std::logic_error(
                                    "compose_period: reachable inventory escapes bounds "
                                    "(inadmissible action)");
                            if (ask_leg.present && a2 == 0) {
                                const int r = ask_leg.rel - d2;
                                ns.r_ask = r > trunc.r_max ? RelPrice::pos_inf() : RelPrice(r);
                            }
                            if (bid_leg.present && b2 == 0) {
                                const int r = bid_leg.rel + d2;
                                ns.r_bid = r > trunc.r_max ? RelPrice::pos_inf() : RelPrice(r);
                            }
                            acc_map[ns] += pr1 * pr2;
                        }
            }

    return {acc_map.begin(), acc_map.end()};
}

}  // namespace lmm
