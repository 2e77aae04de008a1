#include "lmm/core.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace lmm {

int ModelParams::n_periods() const {
    if (n_periods_override) return *n_periods_override;
    return static_cast<int>(std::floor((horizon - delta_tau) / delta_t));
}

void ModelParams::validate() const {
    if (!(lambda >= 0.0) || !(lambda_plus >= 0.0) || !(lambda_minus >= 0.0))
        throw std::invalid_argument("ModelParams: intensities must be >= 0");
    if (!(delta_tau >= 0.0) || !(delta_tau < delta_t))
        throw std::invalid_argument("ModelParams: need 0 <= delta_tau < delta_t");
    if (!(delta_t > 0.0)) throw std::invalid_argument("ModelParams: delta_t must be > 0");
    if (q_min > -2 || q_max < 2)
        throw std::invalid_argument("ModelParams: need q_min < -1 and q_max > 1");
    if (!(tick > 0.0)) throw std::invalid_argument("ModelParams: tick must be > 0");
    if (n_periods_override && *n_periods_override < 0)
        throw std::invalid_argument("ModelParams: n_periods override must be >= 0");
    if (!n_periods_override && !(horizon >= delta_tau))
        throw std::invalid_argument("ModelParams: horizon must cover at least the latency");
}

namespace {

// Accepts "<key>_per_second" or "<key>_per_minute"; exactly one must be present.
double read_rate(const nlohmann::json& j, const std::string& key) {
    const std::string per_s = key + "_per_second";
    const std::string per_m = key + "_per_minute";
    const bool has_s = j.contains(per_s);
    const bool has_m = j.contains(per_m);
    if (has_s == has_m)
        throw std::invalid_argument("config: expected exactly one of " + per_s + " / " + per_m);
    return has_s ? j.at(per_s).get<double>() : j.at(per_m).get<double>() / 60.0;
}

}  // namespace

ModelParams params_from_json(const nlohmann::json& j) {
    ModelParams p;
    p.lambda = read_rate(j, "lambda");
    p.lambda_plus = read_rate(j, "lambda_plus");
    p.lambda_minus = read_rate(j, "lambda_minus");
    p.delta_tau = j.at("delta_tau_seconds").get<double>();
    p.delta_t = j.at("delta_t_seconds").get<double>();
    p.horizon = j.value("horizon_seconds", 0.0);
    p.q_min = j.at("q_min").get<int>();
    p.q_max = j.at("q_max").get<int>();
    p.tick = j.value("tick_value", 0.01);
    if (j.contains("n_periods")) p.n_periods_override = j.at("n_periods").get<int>();
    p.validate();
    return p;
}

nlohmann::json params_to_json(const ModelParams& p) {
    nlohmann::json j{{"lambda_per_second", p.lambda},
                     {"lambda_plus_per_second", p.lambda_plus},
                     {"lambda_minus_per_second", p.lambda_minus},
                     {"delta_tau_seconds", p.delta_tau},
                     {"delta_t_seconds", p.delta_t},
                     {"horizon_seconds", p.horizon},
                     {"q_min", p.q_min},
                     {"q_max", p.q_max},
                     {"tick_value", p.tick},
                     {"n_periods", p.n_periods()}};
    return j;
}

std::string RelPrice::str() const {
    if (is_pos_inf()) return "inf";
    if (is_neg_inf()) return "-inf";
    return std::to_string(v_);
}

std::string ActionLeg::str() const { return do_nothing_ ? "o" : price_.str(); }

PriceIncrementDist price_increment_dist(double lambda, double t, double epsilon_tail) {
    if (lambda < 0.0) throw std::invalid_argument("price_increment_dist: lambda < 0");
    if (t < 0.0) throw std::invalid_argument("price_increment_dist: t < 0");
    if (!(epsilon_tail > 0.0) || !(epsilon_tail < 1.0))
        throw std::invalid_argument("price_increment_dist: epsilon_tail out of (0,1)");

    PriceIncrementDist d;
    const double mu = lambda * t;
    if (mu > 500.0)
        throw std::invalid_argument("price_increment_dist: rate*time beyond supported range");
    d.rate_time = mu;
    if (mu == 0.0) {
        d.support_k = 0;
        d.pmf = {1.0};
        d.tail_mass = 0.0;
        return d;
    }

    // |displacement| <= jump count, so P(|D| > K) <= P(N > K). Pick the
    // smallest K with that Poisson tail below epsilon_tail.
    int K = 0;
    {
        double term = std::exp(-mu);  // P(N = 0)
        double cdf = term;
        while (1.0 - cdf > epsilon_tail) {
            ++K;
            term *= mu / K;
            cdf += term;
            if (K > 100000) throw std::runtime_error("price_increment_dist: K runaway");
        }
        if (K < 1) K = 1;
    }

    d.support_k = K;
    d.pmf.assign(static_cast<size_t>(2 * K + 1), 0.0);

    // pmf(k) = sum over n >= |k|, n = |k| mod 2, of  Pois(n; mu) * C(n,(n+k)/2) / 2^n.
    // First term is exp(-mu) (mu/2)^|k| / |k|!, and term(n+2)/term(n) =
    // mu^2 / ((n+k+2)(n-k+2)); all terms positive, so plain accumulation is stable.
    for (int k = 0; k <= K; ++k) {
        double term = std::exp(-mu);
        for (int i = 1; i <= k; ++i) term *= (mu / 2.0) / i;
        double sum = term;
        double n = k;
        while (term > sum * 1e-18) {
            term *= mu * mu / ((n + k + 2.0) * (n - k + 2.0));
            sum += term;
            n += 2.0;
            if (n > 1e7) break;
        }
        d.pmf[static_cast<size_t>(K + k)] = sum;
        d.pmf[static_cast<size_t>(K - k)] = sum;  // symmetric by construction
    }

    double total = 0.0;
    for (double p : d.pmf) total += p;
    d.tail_mass = std::max(0.0, 1.0 - total);
    return d;
}

double edge_per_fill(double lambda, double lambda_side) {
    if (lambda < 0.0 || lambda_side < 0.0) throw std::invalid_argument("edge_per_fill: negative rate");
    if (lambda == 0.0 && lambda_side == 0.0)
        throw std::invalid_argument("edge_per_fill: undefined when both rates are zero");
    return lambda_side / (lambda_side + lambda / 2.0) - 0.5;
}

}  // namespace lmm
