#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "aoi_coopt/multi.hpp"
#include "aoi_coopt/oracle.hpp"
#include "aoi_coopt/sim.hpp"
#include "aoi_coopt/tvfl.hpp"

using namespace aoi_coopt;

TEST_CASE("knapsack picks the documented assignment") {
    // two sources, capacity 3: lengths (1, 2) with value 5 + 6 = 11 beat
    // every other feasible combination
    std::vector<std::vector<double>> gains = {{0.0, 5.0, 7.0, 8.0}, {0.0, 4.0, 6.0, 9.0}};
    auto pick = knapsack_select(gains, 3);
    REQUIRE(pick == std::vector<int>{1, 2});
    CHECK(exhaustive_knapsack(gains, 3) == pick);
    double value = gains[0][pick[0]] + gains[1][pick[1]];
    CHECK(value == 11.0);
}

TEST_CASE("knapsack tie-breaks: shorter total, then lexicographic") {
    // equal value, equal total length: the lexicographically smaller
    // assignment leaves source 0 idle
    std::vector<std::vector<double>> lex = {{0.0, 1.0}, {0.0, 1.0}};
    CHECK(knapsack_select(lex, 1) == std::vector<int>{0, 1});
    CHECK(exhaustive_knapsack(lex, 1) == std::vector<int>{0, 1});
    // equal value at different total lengths: prefer the shorter assignment
    std::vector<std::vector<double>> len = {{0.0, 2.0}, {0.0, 0.0, 2.0}};
    CHECK(knapsack_select(len, 2) == std::vector<int>{1, 0});
    CHECK(exhaustive_knapsack(len, 2) == std::vector<int>{1, 0});
    // zero capacity and over-capacity edges
    CHECK(knapsack_select(lex, 0) == std::vector<int>{0, 0});
    CHECK(knapsack_select(lex, 10) == std::vector<int>{1, 1});
}

TEST_CASE("knapsack agrees with enumeration on random dyadic instances") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        int M = 1 + static_cast<int>(rng.next() % 4);
        int N = static_cast<int>(rng.next() % 7);
        std::vector<std::vector<double>> gains(M);
        for (auto& g : gains) {
            g.assign(2 + rng.next() % 4, 0.0);
            // dyadic values force exact ties to exercise both tie rules
            for (std::size_t l = 1; l < g.size(); ++l)
                g[l] = static_cast<double>(static_cast<long long>(rng.next() % 33) - 16) / 16.0;
        }
        auto dp = knapsack_select(gains, N);
        auto ref = exhaustive_knapsack(gains, N);
        REQUIRE(dp == ref);
    }
}

TEST_CASE("knapsack input validation") {
    CHECK_THROWS_AS(knapsack_select({{1.0, 2.0}}, 1), std::invalid_argument);
    CHECK_THROWS_AS(knapsack_select({{0.0, 1.0}}, -1), std::invalid_argument);
}

TEST_CASE("priced source at zero price matches the single-source solvers") {
    // one-slot deliveries match a unit transmission model, so the relaxed
    // chain at lambda = 0 is the plain single-source problem
    auto t = InferenceErrorTable::custom(
        {{3.0, 2.0}, {1.0, 2.5}, {4.0, 0.5}, {2.0, 3.0}, {5.0, 1.0}, {4.5, 4.0}, {4.5, 4.0}});
    MultiSource src(t, 2, 6);
    SourceValueTables tab = rvi_source(src, 0.0);

    SourceConfig cfg(t, TransmissionModel::det(0.0, 2), 2, 6);
    TvflPolicy p = solve_tvfl(cfg);
    CHECK(tab.p_bar == Catch::Approx(p.p_bar).epsilon(1e-6));
    CHECK(tab.p_bar == Catch::Approx(exhaustive_single_source(cfg)).epsilon(1e-6));
}

TEST_CASE("value tables price transmissions linearly") {
    auto t = InferenceErrorTable::custom(
        {{3.0, 2.0}, {1.0, 2.5}, {4.0, 0.5}, {2.0, 3.0}, {5.0, 1.0}, {4.5, 4.0}, {4.5, 4.0}});
    MultiSource src(t, 2, 6);
    SourceValueTables tab = rvi_source(src, 0.1);
    for (long long delta = 1; delta <= 6; ++delta)
        for (int d = 1; d <= 2; ++d) {
            CHECK(net_gain(tab, 0.1, delta, d, 0) == 0.0);
            for (int l = 1; l <= 2; ++l) {
                // with tables held fixed the gain is affine in the price
                double at1 = net_gain(tab, 0.1, delta, d, l);
                double at2 = net_gain(tab, 0.35, delta, d, l);
                CHECK(at2 == Catch::Approx(at1 - 0.25 * l).margin(1e-12));
            }
        }
    CHECK_THROWS_AS(net_gain(tab, 0.1, 1, 1, 3), std::out_of_range);
    // gain at the anchor, l = d = 1: h(2,1) - h(b_hat+1,1) - lambda
    double expect = tab.h_at(2, 1) - tab.h_at(tab.b_hat[0] + 1, 1) - 0.1;
    CHECK(tab.alpha(1, 1, 1) == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("relaxed action idles on exact ties") {
    auto t = InferenceErrorTable::constant(1.0, 2, 4);
    MultiSource src(t, 2, 4);
    SourceValueTables tab = rvi_source(src, 0.0);
    // constant error: every h is 0, every gain is 0, strict improvement fails
    for (long long delta = 1; delta <= 4; ++delta)
        for (int d = 1; d <= 2; ++d) CHECK(relaxed_action(tab, 0.0, {delta, d}).l == 0);
}

TEST_CASE("source advance applies one-slot deliveries and clamped aging") {
    auto t = InferenceErrorTable::linear(1.0, 2, 5);
    MultiSource src(t, 2, 5);
    SystemState s{3, 1};
    detail::advance_source(src, s, {0, 2, 0});
    CHECK(s.delta == 1);
    CHECK(s.d == 2);
    detail::advance_source(src, s, {0, 1, 1});
    CHECK(s.delta == 2);
    CHECK(s.d == 1);
    for (int i = 0; i < 10; ++i) detail::advance_source(src, s, {0, 0, 0});
    CHECK(s.delta == 5);
    CHECK(s.d == 1);
}

TEST_CASE("dual ascent on an oversubscribed pair") {
    auto t = InferenceErrorTable::linear(1.0, 1, 4);
    std::vector<MultiSource> sources = {MultiSource(t, 1, 4), MultiSource(t, 1, 4)};
    MultiConfig cfg(1, std::move(sources));
    DualResult res = dual_ascent(cfg);
    // both sources want the channel every slot, so the price must rise
    CHECK(res.lambda_star > 0.0);
    CHECK(res.iters >= 1000);
    REQUIRE(res.policy.per_source.size() == 2);
    // identical sources resolve to one solved table
    CHECK(res.policy.per_source[0].h == res.policy.per_source[1].h);
    CHECK(res.policy.per_source[0].p_bar == res.policy.per_source[1].p_bar);

    // channel-feasible rollout: the knapsack never over-commits
    std::vector<SystemState> states(2, SystemState{1, 1});
    for (int slot = 0; slot < 200; ++slot) {
        auto acts = net_gain_policy_step(cfg, res.policy, states);
        int used = 0;
        for (const auto& a : acts) used += a.l;
        CHECK(used <= cfg.N);
    }

    // the decoupled evaluation cannot exceed the coupled policy's error
    double lb = lower_bound_eval(cfg, res.policy, 20000);
    SimResult ng = simulate_multi(cfg, MultiMode::net_gain, &res.policy, nullptr, 20000, 1);
    CHECK(lb <= ng.time_avg_error + 1e-9);
}

TEST_CASE("multi policy json round trip") {
    auto t = InferenceErrorTable::linear(1.0, 2, 6);
    MultiConfig cfg(2, {MultiSource(t, 2, 6)});
    DualResult res = dual_ascent(cfg);
    MultiPolicy back = multi_from_json(to_json(res.policy));
    CHECK(back.lambda_star == res.policy.lambda_star);
    REQUIRE(back.per_source.size() == 1);
    CHECK(back.per_source[0].h == res.policy.per_source[0].h);
    CHECK(back.per_source[0].b_hat == res.policy.per_source[0].b_hat);
    CHECK(back.per_source[0].p_bar == res.policy.per_source[0].p_bar);

    nlohmann::json bad = to_json(res.policy);
    bad["sources"][0]["b_hat"] = std::vector<int>{0, 0, 0};
    CHECK_THROWS_AS(multi_from_json(bad), std::invalid_argument);
}

TEST_CASE("config loader resolves table paths and dual parameters") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "aoi_coopt_cfg_test";
    fs::create_directories(dir);
    save_csv(InferenceErrorTable::linear(0.5, 2, 8), (dir / "t.csv").string());
    nlohmann::json j = nlohmann::json::parse(R"({
        "N": 2,
        "sources": [
            {"table": "t.csv", "B": 2, "delta_bound": 8},
            {"table": "t.csv", "B": 1, "delta_bound": 6}
        ],
        "dual": {"beta": 0.5, "theta": 1e-5, "lambda0": 0.25}
    })");
    MultiConfig cfg = load_multi_config(j, dir);
    CHECK(cfg.N == 2);
    REQUIRE(cfg.sources.size() == 2);
    CHECK(cfg.sources[0].B == 2);
    CHECK(cfg.sources[1].table.B() == 1);
    CHECK(cfg.dual.beta == 0.5);
    CHECK(cfg.dual.theta == 1e-5);
    CHECK(cfg.dual.lambda0 == 0.25);
    CHECK_FALSE(cfg.sources[0].same_type(cfg.sources[1]));

    nlohmann::json missing = {{"N", 1}};
    CHECK_THROWS(load_multi_config(missing, dir));
    fs::remove_all(dir);
}

TEST_CASE("rvi rejects negative prices and impossible bounds") {
    auto t = InferenceErrorTable::linear(1.0, 2, 6);
    CHECK_THROWS_AS(rvi_source(MultiSource(t, 2, 6), -0.5), std::invalid_argument);
    CHECK_THROWS_AS(MultiSource(InferenceErrorTable::linear(1.0, 3, 4), 3, 2),
                    std::invalid_argument);
}
