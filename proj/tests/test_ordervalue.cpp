#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lmm/ordervalue.hpp"
#include "support/mc_oracle.hpp"

using namespace lmm;

namespace {

ModelParams table2_params(double dtau) {
    ModelParams p;
    p.lambda = 1.56 / 60;
    p.lambda_plus = p.lambda_minus = 0.875 / 60;
    p.delta_tau = dtau;
    p.delta_t = 4.0;
    p.horizon = 600.0;
    p.q_min = -2;
    p.q_max = 2;
    return p;
}

}  // namespace

TEST_CASE("zero-delay order value branches") {
    const ModelParams p = table2_params(0.2);
    CHECK(order_value_zero_delay(Side::ask, RelPrice(-3), 2.0, p) == -0.5);
    CHECK(order_value_zero_delay(Side::ask, RelPrice::neg_inf(), 2.0, p) == -0.5);
    CHECK(order_value_zero_delay(Side::ask, RelPrice::pos_inf(), 2.0, p) == 0.0);
    ModelParams eq = p;
    eq.lambda_plus = eq.lambda / 2.0;
    CHECK(order_value_zero_delay(Side::ask, RelPrice(0), 2.0, eq) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("proportionality: value over fill probability is the edge") {
    const ModelParams p = table2_params(0.2);
    const double edge = edge_per_fill(p.lambda, p.lambda_plus);
    for (int r = 0; r <= 9; ++r)
        for (double t2 : {0.7, 2.0, 5.0}) {
            const double fp = fill_probability(Side::ask, RelPrice(r), t2, p);
            if (fp <= 1e-12) continue;
            const double h = order_value_zero_delay(Side::ask, RelPrice(r), t2, p);
            CHECK(h / fp == Catch::Approx(edge).margin(1e-9));
        }
}

TEST_CASE("order value with latency") {
    const ModelParams p = table2_params(0.2);
    SECTION("degenerate mixture at t1 = 0") {
        CHECK(order_value(Side::ask, 0.0, 3.8, RelPrice(2), p) ==
              order_value_zero_delay(Side::ask, RelPrice(2), 3.8, p));
    }
    SECTION("market orders cost half the spread exactly") {
        CHECK(order_value(Side::ask, 0.5, 3.8, RelPrice::neg_inf(), p) == -0.5);
        CHECK(order_value(Side::bid, 0.5, 3.8, RelPrice::neg_inf(), p) == -0.5);
    }
    SECTION("published value of the fresh ask at the quote") {
        const double v = order_value(Side::ask, 0.2, 3.8, RelPrice(0), p);
        CHECK(v == Catch::Approx(1.48e-3).epsilon(0.01));
        // frozen converged value
        CHECK(v == Catch::Approx(1.4797356469e-3).margin(1e-11));
    }
    SECTION("bid mirrors ask under symmetric rates") {
        for (int x : {-1, 0, 2})
            CHECK(order_value(Side::bid, 0.8, 3.2, RelPrice(x), p) ==
                  Catch::Approx(order_value(Side::ask, 0.8, 3.2, RelPrice(x), p)).margin(1e-12));
    }
}

TEST_CASE("order value matches the direct expectation oracle", "[mc]") {
    const ModelParams p = table2_params(0.2);
    for (const auto& [t1, x] : std::vector<std::pair<double, int>>{
             {0.0, 0}, {0.2, 0}, {0.2, -1}, {0.8, 1}}) {
        const double h = order_value(Side::ask, t1, 3.8, RelPrice(x), p);
        const auto mc = test::mc_order_value(Side::ask, t1, 3.8, RelPrice(x), p, 1'000'000,
                                             900 + static_cast<std::uint64_t>(x + 10));
        INFO("t1=" << t1 << " x=" << x << " h=" << h << " mc=" << mc.mean << " se=" << mc.se);
        CHECK(std::abs(mc.mean - h) < 3.0 * mc.se);
    }
}

TEST_CASE("h_act composes outstanding and fresh orders") {
    const ModelParams p = table2_params(0.8);
    const RelPrice inf = RelPrice::pos_inf();
    CHECK(h_act(Side::ask, inf, ActionLeg::cancel(), p) == 0.0);
    CHECK(h_act(Side::ask, inf, ActionLeg::quote(1), p) ==
          Catch::Approx(order_value(Side::ask, 0.8, 3.2, RelPrice(1), p)).margin(1e-14));
    CHECK(h_act(Side::ask, RelPrice(0), ActionLeg::nothing(), p) ==
          Catch::Approx(order_value(Side::ask, 0.0, 4.0, RelPrice(0), p)).margin(1e-14));
    CHECK(h_act(Side::ask, RelPrice(1), ActionLeg::market(), p) ==
          Catch::Approx(order_value(Side::ask, 0.0, 0.8, RelPrice(1), p) - 0.5).margin(1e-14));
    CHECK_THROWS_AS(h_act(Side::ask, RelPrice::neg_inf(), ActionLeg::cancel(), p),
                    std::invalid_argument);
}

TEST_CASE("sign law across rate configurations") {
    // values non-positive iff lambda_side <= lambda/2 (scan over the grid)
    for (double frac : {0.3, 0.5, 0.7}) {
        ModelParams p = table2_params(0.2);
        p.lambda_plus = p.lambda_minus = frac * p.lambda;
        bool any_positive = false;
        for (int x = 0; x <= 8; ++x)
            for (double t1 : {0.0, 0.2})
                if (order_value(Side::ask, t1, 3.8, RelPrice(x), p) > 0.0) any_positive = true;
        if (frac <= 0.5)
            CHECK_FALSE(any_positive);
        else
            CHECK(any_positive);
    }
}

TEST_CASE("best positive quote") {
    SECTION("none when the edge is negative") {
        ModelParams p = table2_params(0.2);
        p.lambda_plus = p.lambda_minus = 0.4 * 1.25 / 60;  // 0.5/min < lambda/2
        CHECK_FALSE(best_positive_quote(Side::ask, 0.2, 3.8, p).has_value());
    }
    SECTION("published argmaxes for the two latencies") {
        {
            const auto q = best_positive_quote(Side::ask, 0.2, 3.8, table2_params(0.2));
            REQUIRE(q.has_value());
            CHECK(q->rel_price == 0);
            CHECK(q->value == Catch::Approx(1.48e-3).epsilon(0.01));
        }
        {
            const auto q = best_positive_quote(Side::ask, 0.8, 3.2, table2_params(0.8));
            REQUIRE(q.has_value());
            CHECK(q->rel_price == 1);
            CHECK(q->value == Catch::Approx(4.58e-5).epsilon(0.01));
        }
    }
}
