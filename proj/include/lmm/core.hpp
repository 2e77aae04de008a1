#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lmm {

/// Market and trading parameters. Rates are stored per second; the JSON
/// loader accepts explicit "_per_minute" / "_per_second" suffixes.
struct ModelParams {
    double lambda = 0.0;        // mid-price jump intensity (events/s)
    double lambda_plus = 0.0;   // uninformed buy intensity at best ask (events/s)
    double lambda_minus = 0.0;  // uninformed sell intensity at best bid (events/s)
    double delta_tau = 0.0;     // latency (s)
    double delta_t = 1.0;       // decision period (s)
    double horizon = 0.0;       // trading horizon T (s)
    int q_min = -2;             // inventory lower bound, <= -2
    int q_max = 2;              // inventory upper bound, >= 2
    double tick = 0.01;         // monetary value of one tick

    // When set, overrides the derived period count (used for fixed-N sweeps).
    std::optional<int> n_periods_override;

    /// N = floor((T - delta_tau) / delta_t) unless overridden.
    int n_periods() const;

    /// Throws std::invalid_argument if any invariant is violated.
    void validate() const;
};

ModelParams params_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const ModelParams& p);

/// Extended-integer relative price: -inf < any int < +inf.
/// +inf encodes "no order", -inf encodes "market order".
class RelPrice {
  public:
    constexpr RelPrice() : v_(0), kind_(Kind::finite) {}
    constexpr explicit RelPrice(int k) : v_(k), kind_(Kind::finite) {}
    static constexpr RelPrice pos_inf() { return RelPrice(0, Kind::pos_inf); }
    static constexpr RelPrice neg_inf() { return RelPrice(0, Kind::neg_inf); }

    constexpr bool is_finite() const { return kind_ == Kind::finite; }
    constexpr bool is_pos_inf() const { return kind_ == Kind::pos_inf; }
    constexpr bool is_neg_inf() const { return kind_ == Kind::neg_inf; }

    /// Finite value; throws on +-inf.
    int value() const {
        if (!is_finite()) throw std::logic_error("RelPrice: value() on infinite price");
        return v_;
    }

    /// inf + x = inf, -inf + x = -inf (Appendix-style extended arithmetic).
    constexpr RelPrice operator+(int x) const {
        return is_finite() ? RelPrice(v_ + x, Kind::finite) : *this;
    }
    constexpr RelPrice operator-(int x) const { return *this + (-x); }

    friend constexpr bool operator==(RelPrice a, RelPrice b) {
        return a.kind_ == b.kind_ && (a.kind_ != Kind::finite || a.v_ == b.v_);
    }
    friend constexpr bool operator!=(RelPrice a, RelPrice b) { return !(a == b); }
    friend constexpr bool operator<(RelPrice a, RelPrice b) {
        if (a.kind_ != b.kind_) return rank(a.kind_) < rank(b.kind_);
        return a.kind_ == Kind::finite && a.v_ < b.v_;
    }
    friend constexpr bool operator<=(RelPrice a, RelPrice b) { return a < b || a == b; }
    friend constexpr bool operator>(RelPrice a, RelPrice b) { return b < a; }
    friend constexpr bool operator>=(RelPrice a, RelPrice b) { return b <= a; }

    std::string str() const;

  private:
    enum class Kind : std::int8_t { neg_inf, finite, pos_inf };
    constexpr RelPrice(int k, Kind kind) : v_(k), kind_(kind) {}
    static constexpr int rank(Kind k) { return static_cast<int>(k); }
    int v_;
    Kind kind_;
};

enum class Side : std::int8_t { ask, bid };

inline Side other(Side s) { return s == Side::ask ? Side::bid : Side::ask; }
inline const char* to_string(Side s) { return s == Side::ask ? "ask" : "bid"; }

/// One leg of a period action: a relative price (market order = -inf,
/// cancel-without-replace = +inf, quote = finite) or "do nothing".
class ActionLeg {
  public:
    constexpr ActionLeg() : price_(RelPrice::pos_inf()), do_nothing_(true) {}
    constexpr explicit ActionLeg(RelPrice p) : price_(p), do_nothing_(false) {}
    static constexpr ActionLeg nothing() { return ActionLeg(); }
    static constexpr ActionLeg quote(int k) { return ActionLeg(RelPrice(k)); }
    static constexpr ActionLeg cancel() { return ActionLeg(RelPrice::pos_inf()); }
    static constexpr ActionLeg market() { return ActionLeg(RelPrice::neg_inf()); }

    constexpr bool is_do_nothing() const { return do_nothing_; }
    RelPrice price() const {
        if (do_nothing_) throw std::logic_error("ActionLeg: price() on do-nothing");
        return price_;
    }

    friend constexpr bool operator==(ActionLeg a, ActionLeg b) {
        if (a.do_nothing_ != b.do_nothing_) return false;
        return a.do_nothing_ || a.price_ == b.price_;
    }
    friend constexpr bool operator!=(ActionLeg a, ActionLeg b) { return !(a == b); }

    std::string str() const;

  private:
    RelPrice price_;
    bool do_nothing_;
};

struct ActionPair {
    ActionLeg ask;
    ActionLeg bid;
    friend bool operator==(const ActionPair& a, const ActionPair& b) {
        return a.ask == b.ask && a.bid == b.bid;
    }
};

/// Law of the mid-price displacement over a window: the difference of two
/// independent Poisson(rate_time/2) counts, truncated to [-K, K].
struct PriceIncrementDist {
    double rate_time = 0.0;   // lambda * t
    int support_k = 0;        // truncation half-width K
    std::vector<double> pmf;  // index k + K, k in [-K, K]
    double tail_mass = 0.0;   // mass outside [-K, K], bounded by epsilon_tail

    double at(int k) const {
        return (k < -support_k || k > support_k) ? 0.0 : pmf[static_cast<size_t>(k + support_k)];
    }
};

/// Displacement law over a window of length t under jump intensity lambda.
/// K is chosen so the truncated tail is below epsilon_tail.
PriceIncrementDist price_increment_dist(double lambda, double t, double epsilon_tail = 1e-12);

/// Conditional expected profit per fill, lambda_side/(lambda_side + lambda/2) - 0.5,
/// in ticks. Throws if both rates are zero.
double edge_per_fill(double lambda, double lambda_side);

}  // namespace lmm
