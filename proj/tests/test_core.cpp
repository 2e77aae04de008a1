#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <nlohmann/json.hpp>

#include "lmm/core.hpp"
#include "lmm/rng.hpp"

using namespace lmm;

TEST_CASE("model params derive N and validate") {
    ModelParams p;
    p.lambda = 1.56 / 60;
    p.lambda_plus = p.lambda_minus = 0.875 / 60;
    p.delta_tau = 0.02;
    p.delta_t = 1.0;
    p.horizon = 600.0;
    p.q_min = -4;
    p.q_max = 4;
    p.validate();
    CHECK(p.n_periods() == 599);  // floor((600 - 0.02) / 1)

    p.delta_tau = 0.0;
    CHECK(p.n_periods() == 600);

    p.delta_t = 0.5;
    p.horizon = 90.0;
    p.delta_tau = 0.05;
    CHECK(p.n_periods() == 179);

    SECTION("rejects bad fields") {
        ModelParams bad = p;
        bad.delta_tau = 0.6;  // >= delta_t
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = p;
        bad.q_min = -1;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = p;
        bad.lambda = -1.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }
}

TEST_CASE("params load from json with unit suffixes") {
    const auto j = nlohmann::json::parse(R"({
        "lambda_per_minute": 1.56,
        "lambda_plus_per_minute": 0.875,
        "lambda_minus_per_second": 0.0145833333,
        "delta_tau_seconds": 0.2,
        "delta_t_seconds": 4.0,
        "horizon_seconds": 600.0,
        "q_min": -2, "q_max": 2
    })");
    const ModelParams p = params_from_json(j);
    CHECK(p.lambda == Catch::Approx(1.56 / 60).epsilon(1e-12));
    CHECK(p.lambda_plus == Catch::Approx(0.875 / 60).epsilon(1e-12));
    CHECK(p.lambda_minus == Catch::Approx(0.0145833333).epsilon(1e-12));

    auto missing = j;
    missing.erase("lambda_per_minute");
    CHECK_THROWS_AS(params_from_json(missing), std::invalid_argument);
    auto both = j;
    both["lambda_per_second"] = 0.026;
    CHECK_THROWS_AS(params_from_json(both), std::invalid_argument);
}

TEST_CASE("rel price extended arithmetic and ordering") {
    const RelPrice inf = RelPrice::pos_inf();
    const RelPrice ninf = RelPrice::neg_inf();
    CHECK(inf + 5 == inf);
    CHECK(ninf + 5 == ninf);
    CHECK(RelPrice(3) + 2 == RelPrice(5));

    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const int k = static_cast<int>(rng.next_u64() % 41) - 20;
        const int m = static_cast<int>(rng.next_u64() % 41) - 20;
        CHECK(ninf < RelPrice(k));
        CHECK(RelPrice(k) < inf);
        CHECK((RelPrice(k) < RelPrice(m)) == (k < m));
        CHECK((RelPrice(k) + m).value() == k + m);
        CHECK(inf + m == inf);
        CHECK(ninf + m == ninf);
    }
}

TEST_CASE("price increment dist: point mass, symmetry, frozen value") {
    SECTION("no jumps possible") {
        const auto d = price_increment_dist(0.0, 5.0);
        CHECK(d.support_k == 0);
        CHECK(d.at(0) == 1.0);
        CHECK(d.tail_mass == 0.0);
    }
    SECTION("symmetry at lambda t = 1.3") {
        const auto d = price_increment_dist(1.3, 1.0);
        for (int k = 0; k <= d.support_k; ++k) CHECK(d.at(k) == d.at(-k));
    }
    SECTION("independent Bessel route at lambda t = 1") {
        // P(D = k) = exp(-mu) I_k(mu); library Bessel is the second route.
        const auto d = price_increment_dist(1.0, 1.0);
        for (int k = 0; k <= 3; ++k) {
            const double ref = std::exp(-1.0) * std::cyl_bessel_i(k, 1.0);
            CHECK(d.at(k) == Catch::Approx(ref).epsilon(1e-13));
        }
        CHECK(d.at(0) == Catch::Approx(0.46575960759364043).epsilon(1e-14));
    }
    SECTION("mass accounting") {
        const auto d = price_increment_dist(0.7, 2.0, 1e-12);
        double sum = 0.0;
        for (int k = -d.support_k; k <= d.support_k; ++k) sum += d.at(k);
        CHECK(sum + d.tail_mass == Catch::Approx(1.0).margin(1e-14));
        CHECK(d.tail_mass <= 1e-12);
    }
    SECTION("rejects bad arguments") {
        CHECK_THROWS_AS(price_increment_dist(-1.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(price_increment_dist(1.0, -1.0), std::invalid_argument);
    }
}

TEST_CASE("price increment dist composes under time") {
    // Convolving the laws for t1 and t2 matches the law for t1 + t2.
    const double lam = 1.3;
    const auto a = price_increment_dist(lam, 0.4);
    const auto b = price_increment_dist(lam, 0.9);
    const auto c = price_increment_dist(lam, 1.3);
    double tv = 0.0;
    for (int k = -c.support_k; k <= c.support_k; ++k) {
        double conv = 0.0;
        for (int j = -a.support_k; j <= a.support_k; ++j) conv += a.at(j) * b.at(k - j);
        tv += std::abs(conv - c.at(k));
    }
    CHECK(tv < 1e-10);
}

TEST_CASE("edge per fill") {
    CHECK(edge_per_fill(1.56 / 60, 0.78 / 60) == Catch::Approx(0.0).margin(1e-15));
    CHECK(edge_per_fill(0.0, 0.4) == Catch::Approx(0.5).margin(1e-15));
    CHECK(edge_per_fill(1.56 / 60, 0.875 / 60) ==
          Catch::Approx(0.875 / 1.655 - 0.5).epsilon(1e-12));
    CHECK_THROWS_AS(edge_per_fill(0.0, 0.0), std::invalid_argument);
}
