#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "lmm/dpsolver.hpp"
#include "lmm/ordervalue.hpp"
#include "support/brute_force.hpp"

using namespace lmm;

namespace {

ModelParams fast_params() {
    ModelParams p;
    p.lambda = 6.0 / 60;
    p.lambda_plus = p.lambda_minus = 5.0 / 60;
    p.delta_tau = 0.25;
    p.delta_t = 1.0;
    p.horizon = 6.3;
    p.q_min = -2;
    p.q_max = 2;
    return p;
}

ModelParams ge_params() {
    ModelParams p;
    p.lambda = 1.56 / 60;
    p.lambda_plus = p.lambda_minus = 0.875 / 60;
    p.delta_tau = 0.8;
    p.delta_t = 4.0;
    p.horizon = 8.9;  // N = 2
    p.q_min = -2;
    p.q_max = 2;
    return p;
}

ReducedState start_state() {
    return ReducedState{0, RelPrice::pos_inf(), RelPrice::pos_inf()};
}

}  // namespace

TEST_CASE("state space enumeration respects the bound constraints") {
    ModelParams p = fast_params();
    Truncation t;
    t.r_max = 6;
    StateSpace space(p, t);
    const int R = t.r_max + 2;
    // q interior levels carry R*R states; the bounds force one side to +inf.
    CHECK(space.size() == 3 * R * R + 2 * R);
    CHECK(space.index(ReducedState{p.q_min, RelPrice(0), RelPrice(0)}) == -1);
    CHECK(space.index(ReducedState{p.q_min, RelPrice::pos_inf(), RelPrice(3)}) >= 0);
    CHECK(space.index(ReducedState{p.q_max, RelPrice(3), RelPrice::pos_inf()}) >= 0);
    // clamping folds far prices onto +inf
    CHECK(space.index(ReducedState{0, RelPrice(t.r_max + 5), RelPrice(0)}) ==
          space.index(ReducedState{0, RelPrice::pos_inf(), RelPrice(0)}));
    for (int i = 0; i < space.size(); ++i) CHECK(space.index(space.state(i)) == i);
}

TEST_CASE("admissible actions follow the boundary sets") {
    ModelParams p = fast_params();
    const ActionGrid grid{0, 2};
    const auto legs = grid.legs();
    const size_t L = legs.size();
    const RelPrice inf = RelPrice::pos_inf();

    SECTION("interior state gets the full product") {
        CHECK(admissible_actions(ReducedState{0, inf, inf}, p, grid).size() == L * L);
    }
    SECTION("upper bound with zero latency") {
        ModelParams z = p;
        z.delta_tau = 0.0;
        const ReducedState s{z.q_max, RelPrice(1), inf};
        const auto acts = admissible_actions(s, z, grid);
        const auto has = [&](const ActionPair& a) {
            return std::find(acts.begin(), acts.end(), a) != acts.end();
        };
        CHECK(has(ActionPair{ActionLeg::quote(0), ActionLeg::cancel()}));
        CHECK(has(ActionPair{ActionLeg::market(), ActionLeg::quote(0)}));
        CHECK_FALSE(has(ActionPair{ActionLeg::cancel(), ActionLeg::quote(0)}));
    }
    SECTION("latency extends the lower set to the adjacent level") {
        const ReducedState s{p.q_min + 1, RelPrice(0), inf};
        const auto acts = admissible_actions(s, p, grid);
        const auto has = [&](const ActionPair& a) {
            return std::find(acts.begin(), acts.end(), a) != acts.end();
        };
        CHECK_FALSE(has(ActionPair{ActionLeg::quote(2), ActionLeg::quote(1)}));
        CHECK(has(ActionPair{ActionLeg::nothing(), ActionLeg::quote(1)}));
        CHECK(has(ActionPair{ActionLeg::quote(2), ActionLeg::market()}));
        // without the live ask the state is interior again
        CHECK(admissible_actions(ReducedState{p.q_min + 1, inf, inf}, p, grid).size() == L * L);
    }
}

TEST_CASE("terminal g values") {
    ModelParams p = fast_params();
    p.q_max = 4;
    const RelPrice inf = RelPrice::pos_inf();
    CHECK(terminal_g(ReducedState{0, inf, inf}, p) == Catch::Approx(0.0).margin(1e-15));
    CHECK(terminal_g(ReducedState{3, inf, inf}, p) == Catch::Approx(-1.5).margin(1e-12));
    // |0 - 1fill| = 1fill: penalty is half the fill probability
    const double expect = order_value(Side::ask, 0.0, p.delta_tau, RelPrice(0), p) -
                          0.5 * fill_probability(Side::ask, RelPrice(0), p.delta_tau, p);
    CHECK(terminal_g(ReducedState{0, RelPrice(0), inf}, p) ==
          Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("optimized solver matches the serial kernel-chaining reference") {
    ModelParams p = fast_params();
    Truncation t;
    t.r_max = 6;
    const ActionGrid grid{0, 2};
    const Solution fast = backward_solve(p, t, grid);
    const Solution ref = backward_solve_reference(p, t, grid);
    REQUIRE(fast.surface.g.size() == ref.surface.g.size());
    for (size_t i = 0; i < fast.surface.g.size(); ++i)
        for (size_t s = 0; s < fast.surface.g[i].size(); ++s) {
            INFO("period " << i << " state " << s);
            CHECK(fast.surface.g[i][s] == Catch::Approx(ref.surface.g[i][s]).margin(1e-11));
        }
    for (size_t i = 0; i < fast.policy.actions.size(); ++i)
        for (size_t s = 0; s < fast.policy.actions[i].size(); ++s) {
            // identical tie-break enumeration keeps even argmaxes equal
            CHECK(fast.policy.actions[i][s] == ref.policy.actions[i][s]);
        }
}

TEST_CASE("serial and parallel execution agree exactly") {
    ModelParams p = fast_params();
    Truncation t;
    t.r_max = 6;
    const ActionGrid grid{0, 2};
    SolveOptions par;
    par.parallel = true;
    SolveOptions ser;
    ser.parallel = false;
    const Solution a = backward_solve(p, t, grid, par);
    const Solution b = backward_solve(p, t, grid, ser);
    for (size_t i = 0; i < a.surface.g.size(); ++i)
        for (size_t s = 0; s < a.surface.g[i].size(); ++s)
            CHECK(a.surface.g[i][s] == b.surface.g[i][s]);  // bitwise
}

TEST_CASE("brute-force equivalence at N = 2") {
    ModelParams p = ge_params();
    REQUIRE(p.n_periods() == 2);
    const ActionGrid grid{0, 1};  // {-inf, 0, 1, inf, o}
    const Truncation t;
    const double dp = expected_profit(p, t, grid);
    const double brute = test::brute_force_optimal_value(p, t, grid);
    CHECK(dp == Catch::Approx(brute).margin(1e-9));
}

TEST_CASE("zero-edge rates give exactly zero profit") {
    ModelParams p = fast_params();
    p.lambda_plus = p.lambda_minus = p.lambda / 2.0;
    Truncation t;
    t.r_max = 6;
    CHECK(std::abs(expected_profit(p, t, ActionGrid{0, 2})) < 1e-10);
}

TEST_CASE("zero latency removes the dependence on outstanding orders") {
    ModelParams p = fast_params();
    p.delta_tau = 0.0;
    Truncation t;
    t.r_max = 5;
    const Solution sol = backward_solve(p, t, ActionGrid{0, 2});
    for (const auto& row : sol.surface.g) {
        // group by q: all (r+, r-) variants must agree
        for (int si = 0; si < sol.space.size(); ++si) {
            const ReducedState& s = sol.space.state(si);
            const int base = sol.space.index(
                ReducedState{s.q, s.q == p.q_min ? RelPrice::pos_inf() : RelPrice(0),
                             s.q == p.q_max ? RelPrice::pos_inf() : RelPrice(0)});
            CHECK(row[static_cast<size_t>(si)] ==
                  Catch::Approx(row[static_cast<size_t>(base)]).margin(1e-10));
        }
    }
}

TEST_CASE("null strategy floors the value at zero") {
    for (double frac : {0.3, 0.5, 0.9}) {
        ModelParams p = fast_params();
        p.lambda_plus = p.lambda_minus = frac * p.lambda;
        Truncation t;
        t.r_max = 5;
        CHECK(expected_profit(p, t, ActionGrid{0, 2}) >= -1e-10);
    }
}

TEST_CASE("profit curve is the per-horizon profit and is monotone") {
    ModelParams p = fast_params();
    Truncation t;
    t.r_max = 5;
    const ActionGrid grid{0, 2};
    const auto curve = profit_curve(p, 6, t, grid);
    REQUIRE(curve.size() == 7);
    CHECK(curve[0] == 0.0);
    for (size_t m = 1; m < curve.size(); ++m) CHECK(curve[m] >= curve[m - 1] - 1e-10);
    ModelParams pn = p;
    for (int n : {1, 3, 6}) {
        pn.n_periods_override = n;
        CHECK(expected_profit(pn, t, grid) ==
              Catch::Approx(curve[static_cast<size_t>(n)]).margin(1e-12));
    }
}

TEST_CASE("evaluate_policy reproduces the solver on its own argmax") {
    ModelParams p = fast_params();
    Truncation t;
    t.r_max = 5;
    const ActionGrid grid{0, 2};
    const Solution sol = backward_solve(p, t, grid);
    const ValueSurface ev = evaluate_policy(sol.policy, p, t);
    for (size_t i = 0; i < ev.g.size(); ++i)
        for (size_t s = 0; s < ev.g[i].size(); ++s)
            CHECK(ev.g[i][s] == Catch::Approx(sol.surface.g[i][s]).margin(1e-12));

    SECTION("null policy never trades") {
        Policy null;
        null.actions.assign(
            static_cast<size_t>(p.n_periods()),
            std::vector<ActionPair>(static_cast<size_t>(sol.space.size()),
                                    ActionPair{ActionLeg::cancel(), ActionLeg::cancel()}));
        const ValueSurface nv = evaluate_policy(null, p, t);
        const int idx = sol.space.index(start_state());
        CHECK(std::abs(nv.g[0][static_cast<size_t>(idx)]) < 1e-12);
    }
    SECTION("inadmissible policies are rejected") {
        Policy bad;
        bad.actions.assign(
            static_cast<size_t>(p.n_periods()),
            std::vector<ActionPair>(static_cast<size_t>(sol.space.size()),
                                    ActionPair{ActionLeg::quote(0), ActionLeg::quote(0)}));
        CHECK_THROWS_AS(evaluate_policy(bad, p, t), std::invalid_argument);
    }
}

TEST_CASE("truncation stability of the optimal value") {
    ModelParams p = fast_params();
    const ActionGrid grid{0, 2};
    Truncation t8;
    t8.r_max = 8;
    Truncation t16;
    t16.r_max = 16;
    CHECK(expected_profit(p, t8, grid) ==
          Catch::Approx(expected_profit(p, t16, grid)).margin(1e-8));
}

TEST_CASE("solver rejects a grid wider than the truncation") {
    ModelParams p = fast_params();
    Truncation t;
    t.r_max = 3;
    CHECK_THROWS_AS(backward_solve(p, t, ActionGrid{0, 5}), std::invalid_argument);
}
