#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lmm/dpsolver.hpp"
#include "lmm/estimation.hpp"
#include "lmm/ordervalue.hpp"
#include "lmm/profitability.hpp"
#include "lmm/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    lmm::ModelParams params;
    lmm::Truncation trunc;
    lmm::ActionGrid grid;
    lmm::SolveOptions opts;
    std::uint64_t seed = 1;
    fs::path out = ".";
};

lmm::ModelParams default_params() {
    lmm::ModelParams p;
    p.lambda = 1.56 / 60;
    p.lambda_plus = p.lambda_minus = 0.875 / 60;
    p.delta_tau = 0.02;
    p.delta_t = 1.0;
    p.horizon = 600.0;
    p.q_min = -4;
    p.q_max = 4;
    return p;
}

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    cfg.params = default_params();
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    json j;
    in >> j;
    if (j.contains("params")) cfg.params = lmm::params_from_json(j.at("params"));
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        cfg.trunc.r_max = s.value("r_max", cfg.trunc.r_max);
        cfg.trunc.eps_displacement = s.value("epsilon_tail", cfg.trunc.eps_displacement);
        cfg.grid.delta_min = s.value("grid_min", cfg.grid.delta_min);
        cfg.grid.delta_max = s.value("grid_max", cfg.grid.delta_max);
    }
    return cfg;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
}

// Figure-style quote codes: 15 is ask do-nothing, -14 bid do-nothing, other
// codes y map to ask delta = y - 1 and bid delta = -y; cancel and market
// legs sit on sentinel rows outside the quote band.
int ask_code(const lmm::ActionLeg& leg) {
    if (leg.is_do_nothing()) return 15;
    if (leg.price().is_pos_inf()) return 14;
    if (leg.price().is_neg_inf()) return -13;
    return leg.price().value() + 1;
}
int bid_code(const lmm::ActionLeg& leg) {
    if (leg.is_do_nothing()) return -14;
    if (leg.price().is_pos_inf()) return -13;
    if (leg.price().is_neg_inf()) return 14;
    return -leg.price().value();
}

int cmd_order_value(const RunConfig& cfg, double t1, double t2, int lo, int hi) {
    auto f = open_out(cfg.out, "order_values.csv");
    f << "side,t1,t2,rel_price,value,fill_prob\n";
    for (const auto side : {lmm::Side::ask, lmm::Side::bid})
        for (int x = lo; x <= hi; ++x) {
            const double v = lmm::order_value(side, t1, t2, lmm::RelPrice(x), cfg.params);
            const double fp =
                lmm::fill_probability_with_latency(side, t1, t2, lmm::RelPrice(x), cfg.params);
            f << to_string(side) << ',' << num(t1) << ',' << num(t2) << ',' << x << ',' << num(v)
              << ',' << num(fp) << '\n';
        }
    return 0;
}

json solve_summary(const lmm::Solution& sol) {
    return json{{"expected_profit_ticks", sol.expected_profit()},
                {"state_count", sol.diag.state_count},
                {"lattice_latency", sol.diag.lattice_latency},
                {"lattice_active", sol.diag.lattice_active},
                {"max_kernel_truncation", sol.diag.max_kernel_truncation},
                {"n_periods", static_cast<int>(sol.policy.actions.size())}};
}

int cmd_solve(const RunConfig& cfg) {
    const lmm::Solution sol = lmm::backward_solve(cfg.params, cfg.trunc, cfg.grid, cfg.opts);
    auto f = open_out(cfg.out, "surface.csv");
    f << "period,q,r_ask,r_bid,g,ask_leg,bid_leg\n";
    const int N = static_cast<int>(sol.policy.actions.size());
    for (int i = 0; i <= N; ++i)
        for (int s = 0; s < sol.space.size(); ++s) {
            const auto& st = sol.space.state(s);
            f << i << ',' << st.q << ',' << st.r_ask.str() << ',' << st.r_bid.str() << ','
              << num(sol.surface.g[static_cast<size_t>(i)][static_cast<size_t>(s)]);
            if (i < N) {
                const auto& a =
                    sol.policy.actions[static_cast<size_t>(i)][static_cast<size_t>(s)];
                f << ',' << a.ask.str() << ',' << a.bid.str() << '\n';
            } else {
                f << ",,\n";
            }
        }
    auto js = open_out(cfg.out, "summary.json");
    js << solve_summary(sol).dump(2) << '\n';
    std::cout << solve_summary(sol).dump(2) << '\n';
    return 0;
}

int cmd_simulate(const RunConfig& cfg, int n_paths) {
    const lmm::Solution sol = lmm::backward_solve(cfg.params, cfg.trunc, cfg.grid, cfg.opts);
    const double horizon = cfg.params.n_periods() * cfg.params.delta_t + cfg.params.delta_tau;
    const lmm::MarketEventStream stream =
        lmm::simulate_market(cfg.params, cfg.seed, std::max(horizon, cfg.params.delta_t));
    const lmm::SimStart start{0, 100, 0};
    const lmm::SimResult res = lmm::run_policy(sol.policy, sol.space, stream, cfg.params, start);

    auto tf = open_out(cfg.out, "trades.csv");
    tf << "t,side,price_half_ticks,kind,period\n";
    for (const auto& tr : res.trades)
        tf << num(tr.t) << ',' << to_string(tr.side) << ',' << tr.price_ht << ','
           << to_string(tr.kind) << ',' << tr.period << '\n';

    auto inv = open_out(cfg.out, "inventory.csv");
    inv << "t,q\n";
    for (const auto& [t, q] : res.inventory_path) inv << num(t) << ',' << q << '\n';

    auto qf = open_out(cfg.out, "quotes.csv");
    qf << "period,t,ask_leg,bid_leg,ask_code,bid_code\n";
    for (size_t i = 0; i < res.quote_path.size(); ++i) {
        const auto& a = res.quote_path[i];
        qf << i << ',' << num(static_cast<double>(i) * cfg.params.delta_t) << ',' << a.ask.str()
           << ',' << a.bid.str() << ',' << ask_code(a.ask) << ',' << bid_code(a.bid) << '\n';
    }

    json sj = solve_summary(sol);
    sj["terminal_wealth_ticks"] = res.terminal_wealth_ticks();
    sj["n_trades"] = res.trades.size();
    if (n_paths > 1) {
        const lmm::McValue mc = lmm::mc_policy_value(sol.policy, sol.space, cfg.params, start,
                                                     n_paths, cfg.seed, cfg.opts);
        sj["mc_mean_ticks"] = mc.mean;
        sj["mc_std_error_ticks"] = mc.std_error;
        sj["mc_paths"] = mc.n_paths;
    }
    auto js = open_out(cfg.out, "summary.json");
    js << sj.dump(2) << '\n';
    std::cout << sj.dump(2) << '\n';
    return 0;
}

int cmd_profitability(const RunConfig& cfg, int n_max, const std::vector<double>& sweep_dtau,
                      const std::vector<double>& sweep_lambda_side) {
    const lmm::ProfitabilityReport rep =
        lmm::profitability_report(cfg.params, n_max, cfg.trunc, cfg.grid, cfg.opts);
    auto js = open_out(cfg.out, "profitability.json");
    js << lmm::to_json(rep).dump(2) << '\n';
    std::cout << lmm::to_json(rep).dump(2) << '\n';

    if (!sweep_dtau.empty()) {
        auto f = open_out(cfg.out, "profit_sweep.csv");
        f << "delta_tau,lambda_side_per_second,expected_profit_ticks\n";
        const std::vector<double> lams = sweep_lambda_side.empty()
                                             ? std::vector<double>{cfg.params.lambda_plus}
                                             : sweep_lambda_side;
        for (const double lam : lams)
            for (const double dtau : sweep_dtau) {
                lmm::ModelParams p = cfg.params;
                p.lambda_plus = p.lambda_minus = lam;
                p.delta_tau = dtau;
                f << num(dtau) << ',' << num(lam) << ','
                  << num(lmm::expected_profit(p, cfg.trunc, cfg.grid, cfg.opts)) << '\n';
            }
    }
    return 0;
}

int cmd_estimate(const RunConfig& cfg, const std::string& msg, const std::string& book,
                 long tick_units, bool side_resolved) {
    const lmm::LobsterData data = lmm::parse_lobster(msg, book);
    const double lam = lmm::estimate_lambda(data.snapshots, tick_units);
    const auto [lp, lm] =
        lmm::estimate_uninformed_rates(data.events, data.snapshots, side_resolved);
    json j{{"lambda_per_minute", lam},
           {"lambda_plus_per_minute", lp},
           {"lambda_minus_per_minute", lm},
           {"rows", data.events.size()},
           {"warnings", data.warnings}};
    auto js = open_out(cfg.out, "estimates.json");
    js << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_replay(const RunConfig& cfg, const std::string& msg, const std::string& book,
               double latency, int n_orders, const std::string& side) {
    const lmm::LobsterData data = lmm::parse_lobster(msg, book);
    lmm::ReplayConfig rc;
    rc.latency = latency;
    rc.n_orders = n_orders;
    rc.seed = cfg.seed;
    rc.side = side == "ask" ? lmm::Side::ask : lmm::Side::bid;
    const lmm::ReplayResult res = lmm::replay_artificial_orders(data.events, data.snapshots, rc);
    json j{{"latency", res.latency},
           {"n_injected", res.n_injected},
           {"n_type1", res.n_type1},
           {"n_type2", res.n_type2},
           {"ratio_estimate", res.n_type2 > 0 ? json(res.ratio_estimate) : json()},
           {"insufficient", res.insufficient}};
    auto js = open_out(cfg.out, "replay.json");
    js << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    auto f = open_out(cfg.out, "injections.csv");
    f << "decision_time,outcome,resolve_time\n";
    for (const auto& r : res.records)
        f << num(r.decision_time) << ',' << to_string(r.outcome) << ',' << num(r.resolve_time)
          << '\n';
    return 0;
}

int cmd_reproduce(const RunConfig& cfg, const std::string& what) {
    if (what == "table2") {
        lmm::ModelParams p = default_params();
        p.delta_t = 4.0;
        p.q_min = -2;
        p.q_max = 2;
        auto f = open_out(cfg.out, "table2.csv");
        f << "delta_tau,rel_price,order_value_ticks\n";
        for (const double dtau : {0.2, 0.8}) {
            p.delta_tau = dtau;
            for (int x = 0; x <= 4; ++x)
                f << num(dtau) << ',' << x << ','
                  << num(lmm::order_value(lmm::Side::ask, dtau, 4.0 - dtau, lmm::RelPrice(x), p))
                  << '\n';
        }
        return 0;
    }
    if (what == "fig3") {
        // resting-order values against latency in the adverse regime
        lmm::ModelParams p = default_params();
        p.delta_t = 5.0;
        p.lambda_plus = p.lambda_minus = 0.4 * 1.25 / 60;
        auto f = open_out(cfg.out, "fig3.csv");
        f << "delta_tau,r_ask,order_value_ticks\n";
        for (int i = 1; i <= 16; ++i) {
            const double dtau = 0.25 * i;
            for (const int r : {0, 1})
                f << num(dtau) << ',' << r << ','
                  << num(lmm::order_value(lmm::Side::ask, 0.0, dtau, lmm::RelPrice(r), p)) << '\n';
        }
        return 0;
    }
    if (what == "fig4") {
        lmm::ModelParams p = default_params();
        p.delta_t = 0.5;
        p.horizon = 90.0;
        p.q_min = -2;
        p.q_max = 2;
        auto f = open_out(cfg.out, "fig4.csv");
        f << "delta_tau,lambda_side_per_minute,expected_profit_ticks\n";
        for (const double lam_min : {0.875, 0.78}) {
            for (const double dtau : {0.0, 0.05, 0.1, 0.15, 0.2}) {
                p.lambda_plus = p.lambda_minus = lam_min / 60;
                p.delta_tau = dtau;
                f << num(dtau) << ',' << num(lam_min) << ','
                  << num(lmm::expected_profit(p, cfg.trunc, cfg.grid, cfg.opts)) << '\n';
            }
        }
        return 0;
    }
    throw std::runtime_error("unknown reproduction target: " + what);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"market-making MDP solver, simulator and estimation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::uint64_t seed = 1;
    int workers = 0;
    std::string out_dir = "out";
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--workers", workers, "worker threads (0 = default)");
    app.add_option("--out", out_dir, "output directory");

    auto* ov = app.add_subcommand("order-value", "order value table as CSV");
    double t1 = 0.2, t2 = 3.8;
    int lo = 0, hi = 12;
    ov->add_option("--t1", t1, "latency window (s)");
    ov->add_option("--t2", t2, "active window (s)");
    ov->add_option("--min-delta", lo, "lowest relative price");
    ov->add_option("--max-delta", hi, "highest relative price");

    auto* sv = app.add_subcommand("solve", "backward induction: surface, policy, summary");

    auto* sim = app.add_subcommand("simulate", "simulate the optimal policy on one path");
    int n_paths = 1;
    sim->add_option("--paths", n_paths, "Monte Carlo paths for the summary statistics");

    auto* prof = app.add_subcommand("profitability", "regime, N_min and its upper bound");
    int n_max = 256;
    std::vector<double> sweep_dtau, sweep_lam;
    prof->add_option("--n-max", n_max, "horizon search limit");
    prof->add_option("--sweep-dtau", sweep_dtau, "latency grid for a profit sweep CSV");
    prof->add_option("--sweep-lambda", sweep_lam, "per-second uninformed rates for the sweep");

    auto* est = app.add_subcommand("estimate", "estimate rates from LOBSTER files");
    std::string msg_path, book_path;
    long tick_units = 100;
    bool side_resolved = false;
    est->add_option("message", msg_path, "message CSV")->required();
    est->add_option("orderbook", book_path, "orderbook CSV")->required();
    est->add_option("--tick-units", tick_units, "price units per tick");
    est->add_flag("--side-resolved", side_resolved, "count buys and sells separately");

    auto* rep = app.add_subcommand("replay", "artificial-order replay estimator");
    double latency = 0.0;
    int n_orders = 500;
    std::string side = "bid";
    rep->add_option("message", msg_path, "message CSV")->required();
    rep->add_option("orderbook", book_path, "orderbook CSV")->required();
    rep->add_option("--latency", latency, "latency (s)");
    rep->add_option("--orders", n_orders, "artificial orders to inject");
    rep->add_option("--side", side, "bid or ask");

    auto* repr = app.add_subcommand("reproduce", "rebuild a published experiment CSV");
    std::string target;
    repr->add_option("target", target, "table2 | fig3 | fig4")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path);
        cfg.seed = seed;
        cfg.opts.threads = workers;
        cfg.out = out_dir;
        if (ov->parsed()) return cmd_order_value(cfg, t1, t2, lo, hi);
        if (sv->parsed()) return cmd_solve(cfg);
        if (sim->parsed()) return cmd_simulate(cfg, n_paths);
        if (prof->parsed()) return cmd_profitability(cfg, n_max, sweep_dtau, sweep_lam);
        if (est->parsed())
            return cmd_estimate(cfg, msg_path, book_path, tick_units, side_resolved);
        if (rep->parsed()) return cmd_replay(cfg, msg_path, book_path, latency, n_orders, side);
        if (repr->parsed()) return cmd_reproduce(cfg, target);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}
