#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "aoi_coopt/core.hpp"
#include "aoi_coopt/error_table.hpp"

using namespace aoi_coopt;

TEST_CASE("error table builders and lookup clamping") {
    auto lin = InferenceErrorTable::linear(0.5, 3, 10);
    REQUIRE(lin.B() == 3);
    REQUIRE(lin.delta_bound() == 10);
    CHECK(lin.lookup(0, 1) == 0.0);
    CHECK(lin.lookup(4, 2) == 2.0);
    CHECK(lin.lookup(10, 3) == 5.0);
    // ages past the bound read the saturation row
    CHECK(lin.lookup(11, 1) == lin.lookup(10, 1));
    CHECK(lin.lookup(1000000, 2) == 5.0);
    CHECK(lin.lookup(-3, 1) == lin.lookup(0, 1));
    CHECK_THROWS_AS(lin.lookup(1, 0), std::out_of_range);
    CHECK_THROWS_AS(lin.lookup(1, 4), std::out_of_range);

    auto c = InferenceErrorTable::constant(2.25, 2, 5);
    for (long long d = 0; d <= 7; ++d)
        for (int l = 1; l <= 2; ++l) CHECK(c.lookup(d, l) == 2.25);

    CHECK(lin.min_value() == 0.0);
    CHECK(lin.max_value() == 5.0);
    CHECK(lin.monotone_in_delta());

    auto dip = InferenceErrorTable::custom({{4.0}, {4.0}, {1.0}, {4.0}, {4.0}});
    CHECK_FALSE(dip.monotone_in_delta());
}

TEST_CASE("window_sum equals direct summation, including the saturated tail") {
    auto t = InferenceErrorTable::custom({{1.0, 0.5}, {2.0, 1.5}, {7.0, 3.0}, {4.0, 2.0}});
    // delta_bound = 3, B = 2
    for (long long start : {0LL, 1LL, 2LL, 3LL, 5LL})
        for (long long w : {1LL, 2LL, 4LL, 9LL})
            for (int l : {1, 2}) {
                double direct = 0.0;
                for (long long k = 0; k < w; ++k) direct += t.lookup(start + k, l);
                CHECK(t.window_sum(start, w, l) == Catch::Approx(direct).margin(1e-12));
            }
    CHECK(t.window_sum(2, 0, 1) == 0.0);
}

TEST_CASE("truncation keeps the window prefix") {
    auto t = InferenceErrorTable::linear(1.0, 4, 12);
    auto cut = t.truncated(2, 6);
    REQUIRE(cut.B() == 2);
    REQUIRE(cut.delta_bound() == 6);
    for (long long d = 0; d <= 6; ++d)
        for (int l = 1; l <= 2; ++l) CHECK(cut.lookup(d, l) == t.lookup(d, l));
    CHECK(cut.lookup(9, 1) == cut.lookup(6, 1));
    CHECK_THROWS_AS(t.truncated(5, 12), std::invalid_argument);
    CHECK_THROWS_AS(t.truncated(2, 13), std::invalid_argument);
}

TEST_CASE("csv round trip preserves every entry") {
    auto t = InferenceErrorTable::custom({{0.125, 0.0625}, {1.0 / 3.0, 0.25}, {5.5, 2.5}});
    std::ostringstream out;
    save_csv(t, out);
    std::istringstream in(out.str());
    auto back = load_csv(in);
    CHECK(back == t);

    // saving again produces identical bytes
    std::ostringstream out2;
    save_csv(back, out2);
    CHECK(out2.str() == out.str());
}

TEST_CASE("csv loader rejects malformed inputs") {
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return load_csv(in);
    };
    CHECK_THROWS(parse(""));
    CHECK_THROWS(parse("# inference error table\n# B=1\n# delta_bound=1\nbogus\n0,1\n1,1\n"));
    // metadata disagreeing with the body
    CHECK_THROWS(parse("# inference error table\n# B=2\n# delta_bound=1\ndelta,l=1\n0,1\n1,1\n"));
    CHECK_THROWS(parse("# inference error table\n# B=1\n# delta_bound=3\ndelta,l=1\n0,1\n1,1\n"));
    // non-contiguous ages
    CHECK_THROWS(parse("# inference error table\n# B=1\n# delta_bound=2\ndelta,l=1\n0,1\n2,1\n"));
}

TEST_CASE("action validation differs between the single and multi channel") {
    // single source: a transmission always carries at least one slot
    CHECK_FALSE(validate_action({0, 1, 0}, 3, Mode::single).has_value());
    CHECK_FALSE(validate_action({5, 2, 1}, 3, Mode::single).has_value());
    CHECK(validate_action({0, 0, 0}, 3, Mode::single).has_value());
    CHECK(validate_action({0, 4, 0}, 3, Mode::single).has_value());
    CHECK(validate_action({0, 2, 2}, 3, Mode::single).has_value());
    CHECK(validate_action({-1, 1, 0}, 3, Mode::single).has_value());
    CHECK(validate_action({0, 1, -1}, 3, Mode::single).has_value());
    // multi: l = 0 encodes idling
    CHECK_FALSE(validate_action({0, 0, 0}, 3, Mode::multi).has_value());
    CHECK_FALSE(validate_action({0, 3, 0}, 3, Mode::multi).has_value());
    CHECK(validate_action({0, 2, 2}, 3, Mode::multi).has_value());
}

TEST_CASE("delivered age and idle aging") {
    CHECK(aoi_after_delivery(3, 2, Mode::single) == 5);
    CHECK(aoi_after_delivery(1, 0, Mode::single) == 1);
    CHECK_THROWS_AS(aoi_after_delivery(0, 0, Mode::single), std::invalid_argument);
    // multi-source deliveries land in the next slot regardless of length
    CHECK(aoi_after_delivery(7, 2, Mode::multi) == 3);
    SystemState s{4, 2};
    s = aoi_step(s);
    CHECK(s.delta == 5);
    CHECK(s.d == 2);
}

TEST_CASE("deterministic transmission model rounds up and floors at one slot") {
    auto m = TransmissionModel::det(1.5, 4);
    CHECK(m.deterministic());
    CHECK(m.support(1) == TransmissionModel::Support{{2, 1.0}});
    CHECK(m.support(2) == TransmissionModel::Support{{3, 1.0}});
    CHECK(m.support(3) == TransmissionModel::Support{{5, 1.0}});
    CHECK(m.mean(4) == 6.0);
    CHECK(m.max_delay() == 6);
    CHECK(m.max_delay(2) == 3);

    auto zero = TransmissionModel::det(0.0, 2);
    CHECK(zero.support(1) == TransmissionModel::Support{{1, 1.0}});
    CHECK(zero.support(2) == TransmissionModel::Support{{1, 1.0}});

    CHECK_THROWS_AS(TransmissionModel::det(-0.5, 2), std::invalid_argument);
    CHECK_THROWS_AS(m.support(0), std::out_of_range);
    CHECK_THROWS_AS(m.support(5), std::out_of_range);
}

TEST_CASE("tabulated transmission model validates and round-trips through text") {
    std::map<int, TransmissionModel::Support> tab;
    tab[1] = {{1, 0.5}, {3, 0.5}};
    tab[2] = {{2, 1.0}};
    auto m = TransmissionModel::from_table(tab, 2);
    CHECK_FALSE(m.deterministic());
    CHECK(m.mean(1) == 2.0);
    CHECK(m.max_delay() == 3);

    auto back = TransmissionModel::parse(m.text(), 2);
    CHECK(back.support(1) == m.support(1));
    CHECK(back.support(2) == m.support(2));

    auto det = TransmissionModel::parse("det:alpha=2", 3);
    CHECK(det.support(3) == TransmissionModel::Support{{6, 1.0}});

    tab.erase(2);
    CHECK_THROWS_AS(TransmissionModel::from_table(tab, 2), std::invalid_argument);
    tab[2] = {{2, 0.7}, {1, 0.3}};  // not ascending
    CHECK_THROWS_AS(TransmissionModel::from_table(tab, 2), std::invalid_argument);
    tab[2] = {{1, 0.7}, {2, 0.2}};  // mass 0.9
    CHECK_THROWS_AS(TransmissionModel::from_table(tab, 2), std::invalid_argument);
    CHECK_THROWS_AS(TransmissionModel::parse("nonsense", 2), std::invalid_argument);
    CHECK_THROWS_AS(TransmissionModel::parse("det:alpha=abc", 2), std::invalid_argument);
}

TEST_CASE("source config enforces a delta bound wide enough for every delivery") {
    auto t = InferenceErrorTable::linear(1.0, 3, 12);
    auto m = TransmissionModel::det(2.0, 3);  // max delay 6 at l = 3
    SourceConfig cfg(t, m, 3, 12);
    CHECK(cfg.table.B() == 3);
    // delivered age can reach B + max_delay = 9; a bound of 8 cannot represent it
    CHECK_THROWS_AS(SourceConfig(t, m, 3, 8), std::invalid_argument);
    // a transmission model narrower than B is unusable
    CHECK_THROWS_AS(SourceConfig(t, TransmissionModel::det(1.0, 2), 3, 12), std::invalid_argument);
}
