#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <thread>
#include <nlohmann/json.hpp>

#include "lmm/fillmodel.hpp"
#include "support/mc_oracle.hpp"

using namespace lmm;

namespace {

ModelParams ge_params(double dtau, double dt) {
    ModelParams p;
    p.lambda = 1.56 / 60;
    p.lambda_plus = p.lambda_minus = 0.875 / 60;
    p.delta_tau = dtau;
    p.delta_t = dt;
    p.horizon = 600.0;
    p.q_min = -2;
    p.q_max = 2;
    return p;
}

}  // namespace

TEST_CASE("fill probability edge cases") {
    const ModelParams p = ge_params(0.2, 4.0);
    CHECK(fill_probability(Side::ask, RelPrice::pos_inf(), 3.8, p) == 0.0);
    CHECK(fill_probability(Side::ask, RelPrice(0), 0.0, p) == 0.0);
    CHECK_THROWS_AS(fill_probability(Side::ask, RelPrice::neg_inf(), 1.0, p),
                    std::invalid_argument);
    CHECK_THROWS_AS(fill_probability(Side::ask, RelPrice(-1), 1.0, p), std::invalid_argument);
}

TEST_CASE("fill probability against the event-driven oracle", "[mc]") {
    const ModelParams p = ge_params(0.2, 4.0);
    const double analytic = fill_probability(Side::ask, RelPrice(0), 3.8, p);
    // Frozen from the converged solver (cross-checked by an independent
    // forward-equation integration during development).
    CHECK(analytic == Catch::Approx(0.09717289342777).margin(1e-9));
    const auto mc = test::mc_fill(Side::ask, 0, 3.8, p, 2'000'000, 101);
    CHECK(std::abs(mc.p_fill - analytic) < 3.0 * mc.se);
}

TEST_CASE("fill split: conditional ratio is rate-determined") {
    const ModelParams p = ge_params(0.2, 4.0);
    SECTION("absent order") {
        const auto [u, a] = fill_split(Side::ask, RelPrice::pos_inf(), 3.8, p);
        CHECK(u == 0.0);
        CHECK(a == 0.0);
    }
    SECTION("equal rates split evenly") {
        ModelParams eq = p;
        eq.lambda_plus = eq.lambda_minus = eq.lambda / 2.0;
        const auto [u, a] = fill_split(Side::ask, RelPrice(0), 5.0, eq);
        CHECK(u == Catch::Approx(a).epsilon(1e-9));
    }
    SECTION("oracle agreement at rel price 1") {
        const auto [u, a] = fill_split(Side::ask, RelPrice(1), 3.8, p);
        const double fp = fill_probability(Side::ask, RelPrice(1), 3.8, p);
        CHECK(u + a == Catch::Approx(fp).margin(1e-12));
        const double want = p.lambda_plus / (p.lambda_plus + p.lambda / 2.0);
        CHECK(u / (u + a) == Catch::Approx(want).margin(1e-9));
        const auto mc = test::mc_fill(Side::ask, 1, 3.8, p, 2'000'000, 102);
        const double se_u =
            std::sqrt(mc.p_uninformed * (1 - mc.p_uninformed) / static_cast<double>(mc.n));
        const double se_a =
            std::sqrt(mc.p_adverse * (1 - mc.p_adverse) / static_cast<double>(mc.n));
        CHECK(std::abs(mc.p_uninformed - u) < 3.0 * se_u + 1e-12);
        CHECK(std::abs(mc.p_adverse - a) < 3.0 * se_a + 1e-12);
    }
    SECTION("bid side mirrors ask under equal rates") {
        for (int r : {0, 1, 3})
            CHECK(fill_probability(Side::bid, RelPrice(r), 2.5, p) ==
                  Catch::Approx(fill_probability(Side::ask, RelPrice(r), 2.5, p)).epsilon(1e-12));
    }
}

TEST_CASE("fill probability monotone in time and distance") {
    const ModelParams p = ge_params(0.2, 4.0);
    double prev_t = -1.0;
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double f = fill_probability(Side::ask, RelPrice(1), t, p);
        CHECK(f >= prev_t);
        prev_t = f;
    }
    double prev_r = 2.0;
    for (int r = 0; r <= 6; ++r) {
        const double f = fill_probability(Side::ask, RelPrice(r), 3.8, p);
        CHECK(f <= prev_r);
        prev_r = f;
    }
}

TEST_CASE("long horizon absorbs the at-quote order", "[mc]") {
    // Recurrence of the symmetric walk drives absorption to one, at the
    // null-recurrent rate: survival decays like 1/sqrt(lambda t) (excursions
    // below the quote have heavy tails), so survival(4t)/survival(t) ~ 1/2.
    ModelParams p = ge_params(0.0, 4.0);
    const double t50 = 50.0 / p.lambda;
    const double f50 = fill_probability(Side::ask, RelPrice(0), t50, p);
    CHECK(f50 == Catch::Approx(0.94668600969888).margin(1e-8));  // frozen; MC-verified below
    const auto mc = test::mc_fill(Side::ask, 0, t50, p, 400'000, 55);
    CHECK(std::abs(mc.p_fill - f50) < 3.0 * mc.se);
    const double f200 = fill_probability(Side::ask, RelPrice(0), 4.0 * t50, p);
    CHECK(f200 > f50);
    const double ratio = (1.0 - f200) / (1.0 - f50);
    CHECK(ratio > 0.35);
    CHECK(ratio < 0.65);
}

TEST_CASE("phase kernel structure") {
    const ModelParams p = ge_params(0.8, 4.0);
    SECTION("no orders: fills impossible, displacement is the increment law") {
        const auto k = phase_kernel(RelPrice::pos_inf(), RelPrice::pos_inf(), 2.0, p);
        CHECK(k.fill_prob_ask() == 0.0);
        CHECK(k.fill_prob_bid() == 0.0);
        const auto law = price_increment_dist(p.lambda, 2.0);
        const auto marg = k.displacement_marginal();
        for (int d = -k.K; d <= k.K; ++d)
            CHECK(marg[static_cast<size_t>(d + k.K)] ==
                  Catch::Approx(law.at(d)).margin(1e-11));
    }
    SECTION("zero duration is a point mass") {
        const auto k = phase_kernel(RelPrice(0), RelPrice(0), 0.0, p);
        CHECK(k.at(FillType::none, FillType::none, 0) == 1.0);
        CHECK(k.truncation_error == 0.0);
    }
    SECTION("pmf sums to one minus truncation error") {
        const auto k = phase_kernel(RelPrice(0), RelPrice(1), 1.7, p);
        double sum = 0.0;
        for (int a = 0; a <= 2; ++a)
            for (int b = 0; b <= 2; ++b)
                for (int d = -k.K; d <= k.K; ++d)
                    sum += k.at(static_cast<FillType>(a), static_cast<FillType>(b), d);
        CHECK(sum + k.truncation_error == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("json serialization round-trips the cells") {
        const auto k = phase_kernel(RelPrice(0), RelPrice::pos_inf(), 0.8, p);
        const auto j = to_json(k);
        CHECK(j.at("K").get<int>() == k.K);
        double sum = 0.0;
        for (const auto& c : j.at("pmf")) sum += c.at("p").get<double>();
        CHECK(sum == Catch::Approx(1.0 - k.truncation_error).margin(1e-12));
    }
}

TEST_CASE("phase kernel joint law against the oracle", "[mc]") {
    const ModelParams p = ge_params(0.8, 4.0);
    const long n = 2'000'000;
    const auto k = phase_kernel(RelPrice(0), RelPrice(0), 0.8, p);
    const auto counts = test::mc_phase_counts(RelPrice(0), RelPrice(0), 0.8, p, n, 103);
    // every observed cell within 4 SE; unobserved cells must be tiny
    for (int a = 0; a <= 2; ++a)
        for (int b = 0; b <= 2; ++b)
            for (int d = -k.K; d <= k.K; ++d) {
                const double q = k.at(static_cast<FillType>(a), static_cast<FillType>(b), d);
                const auto it = counts.find({a, b, d});
                const double obs =
                    it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
                const double se = std::sqrt(std::max(q, obs) * 1.0 / n) + 1e-9;
                CHECK(std::abs(obs - q) < 4.0 * se + 2e-7);
            }
}

TEST_CASE("kernel invariant to widening the lattice") {
    const ModelParams p = ge_params(0.8, 4.0);
    const Truncation base{};
    Truncation wide = base;
    wide.eps_displacement = 1e-18;  // forces a larger half-width
    const auto a = phase_kernel(RelPrice(0), RelPrice(1), 3.2, p, base);
    const auto b = phase_kernel(RelPrice(0), RelPrice(1), 3.2, p, wide);
    REQUIRE(b.K > a.K);
    for (int fa = 0; fa <= 2; ++fa)
        for (int fb = 0; fb <= 2; ++fb)
            for (int d = -a.K; d <= a.K; ++d)
                CHECK(std::abs(a.at(static_cast<FillType>(fa), static_cast<FillType>(fb), d) -
                               b.at(static_cast<FillType>(fa), static_cast<FillType>(fb), d)) <
                      1e-10);
}

TEST_CASE("kernel cache is concurrency safe and deduplicates") {
    const ModelParams p = ge_params(0.2, 4.0);
    KernelCache cache(p);
#ifdef _OPENMP
#pragma omp parallel for
#endif
    for (int i = 0; i < 64; ++i) {
        const int r = i % 4;
        const auto k = cache.get(RelPrice(r), RelPrice::pos_inf(), 0.7);
        REQUIRE(k != nullptr);
        CHECK(k->ask_in == RelPrice(r));
    }
    CHECK(cache.size() == 4);
}

TEST_CASE("compose period: trivial cases") {
    const ModelParams p = ge_params(0.2, 1.0);
    const Truncation trunc{};
    KernelCache cache(p, trunc);
    const RelPrice inf = RelPrice::pos_inf();

    SECTION("null action from the empty state") {
        const auto pmf = compose_period(ReducedState{0, inf, inf},
                                        ActionPair{ActionLeg::cancel(), ActionLeg::cancel()}, p,
                                        trunc, cache);
        REQUIRE(pmf.size() == 1);
        CHECK(pmf[0].first == ReducedState{0, inf, inf});
        CHECK(pmf[0].second == Catch::Approx(1.0).margin(1e-11));
    }
    SECTION("double market order nets out") {
        const auto pmf = compose_period(ReducedState{0, inf, inf},
                                        ActionPair{ActionLeg::market(), ActionLeg::market()}, p,
                                        trunc, cache);
        for (const auto& [ns, pr] : pmf) {
            CHECK(ns.q == 0);
            CHECK(ns.r_ask == inf);
            CHECK(ns.r_bid == inf);
        }
    }
    SECTION("inadmissible action is rejected through its consequences") {
        // quoting a fresh ask with a live one at the lower-adjacent inventory
        ModelParams tight = p;
        tight.delta_tau = 0.2;
        KernelCache cache2(tight, trunc);
        CHECK_THROWS_AS(
            compose_period(ReducedState{tight.q_min + 1, RelPrice(0), inf},
                           ActionPair{ActionLeg::quote(2), ActionLeg::quote(1)}, tight, trunc,
                           cache2),
            std::logic_error);
    }
}

TEST_CASE("compose period against the two-phase oracle", "[mc]") {
    const ModelParams p = ge_params(0.02, 1.0);
    const Truncation trunc{};
    KernelCache cache(p, trunc);
    const ReducedState s{1, RelPrice(0), RelPrice::pos_inf()};
    const ActionPair act{ActionLeg::nothing(), ActionLeg::cancel()};
    const auto pmf = compose_period(s, act, p, trunc, cache);

    const long n = 2'000'000;
    const auto counts = test::mc_compose_counts(s, act, p, trunc, n, 104);
    const int INF = trunc.r_max + 1;
    double total = 0.0;
    for (const auto& [ns, pr] : pmf) {
        total += pr;
        const int ra = ns.r_ask.is_pos_inf() ? INF : ns.r_ask.value();
        const int rb = ns.r_bid.is_pos_inf() ? INF : ns.r_bid.value();
        const auto it = counts.find({ns.q, ra, rb});
        const double obs = it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
        const double se = std::sqrt(std::max(pr, obs) / n) + 1e-9;
        CHECK(std::abs(obs - pr) < 4.0 * se + 2e-7);
    }
    CHECK(total == Catch::Approx(1.0).margin(1e-9));

    SECTION("marginal displacement reproduces the full-period law") {
        // summing fills out of the chained kernels leaves the increment law
        const auto k1 = phase_kernel(RelPrice(2), RelPrice(2), p.delta_tau, p, trunc);
        const auto k2 =
            phase_kernel(RelPrice(2), RelPrice(2), p.delta_t - p.delta_tau, p, trunc);
        const auto m1 = k1.displacement_marginal();
        const auto m2 = k2.displacement_marginal();
        const auto law = price_increment_dist(p.lambda, p.delta_t);
        for (int d = -law.support_k; d <= law.support_k; ++d) {
            double conv = 0.0;
            for (int j = std::max(-k1.K, d - k2.K); j <= std::min(k1.K, d + k2.K); ++j)
                conv += m1[static_cast<size_t>(j + k1.K)] *
                        m2[static_cast<size_t>(d - j + k2.K)];
            CHECK(conv == Catch::Approx(law.at(d)).margin(1e-10));
        }
    }
}
