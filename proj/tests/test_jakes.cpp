#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aoi_coopt/jakes.hpp"

using namespace aoi_coopt;

namespace {

// Power-series oracle J0(x) = sum (-1)^k (x/2)^{2k} / (k!)^2 in long double.
// Terms peak near k = x/2; for x <= 25 the worst intermediate stays below
// ~1e10, so cancellation leaves at least 1e-12 absolute accuracy, far tighter
// than the 1e-7 bound under test.
long double j0_series(long double x) {
    long double q = x / 2.0L;
    long double term = 1.0L, sum = 1.0L;
    for (int k = 1; k <= 200; ++k) {
        term *= -(q / k) * (q / k);
        sum += term;
        if (std::fabs(term) < 1e-22L && k > static_cast<int>(x)) break;
    }
    return sum;
}

}  // namespace

TEST_CASE("bessel j0 stays within 1e-7 of the series oracle") {
    double worst = 0.0;
    for (double x = 0.0; x <= 25.0; x += 0.01) {
        double err = std::fabs(bessel_j0(x) - static_cast<double>(j0_series(x)));
        worst = std::max(worst, err);
    }
    CHECK(worst < 1e-7);
    // parity and exact anchor
    CHECK(bessel_j0(0.0) == 1.0);
    CHECK(bessel_j0(-4.25) == bessel_j0(4.25));
    // first zero sits between 2.40 and 2.41
    CHECK(bessel_j0(2.40) > 0.0);
    CHECK(bessel_j0(2.41) < 0.0);
}

TEST_CASE("jakes autocorrelation shape") {
    JakesParams p = JakesParams::from_speed(2.0, 15.0, 2e9, 1e-3, 1e-6);
    CHECK(p.f_d == Catch::Approx(15.0 * 2e9 / 299792458.0).epsilon(1e-15));
    CHECK(jakes_autocorr(p, 0) == 2.0);
    CHECK(jakes_autocorr(p, 7) == jakes_autocorr(p, -7));
    for (long long k = 0; k <= 100; ++k) CHECK(std::fabs(jakes_autocorr(p, k)) <= 2.0 + 1e-12);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(JakesParams::from_speed(0.0, 15, 2e9, 1e-3, 1e-6), std::invalid_argument);
    CHECK_THROWS_AS(JakesParams::from_speed(1.0, 15, 2e9, 1e-3, 1e-13), std::invalid_argument);
    JakesParams bad;
    bad.T_s = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = JakesParams{};
    bad.f_d = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("mmse table properties") {
    JakesParams p = JakesParams::from_speed(1.0, 15.0, 2e9, 1e-3, 1e-6);
    InferenceErrorTable t = jakes_error_table(p, 6, 40);
    REQUIRE(t.B() == 6);
    REQUIRE(t.delta_bound() == 40);

    // 0 <= err <= prior variance
    for (long long delta = 0; delta <= 40; ++delta)
        for (int l = 1; l <= 6; ++l) {
            double e = t.lookup(delta, l);
            CHECK(e >= 0.0);
            CHECK(e <= p.b + 1e-9);
        }

    // extra observations never raise the MMSE (the shorter estimator is a
    // restriction of the longer one)
    for (long long delta = 0; delta <= 40; ++delta)
        for (int l = 1; l < 6; ++l)
            CHECK(t.lookup(delta, l + 1) <= t.lookup(delta, l) + 1e-10);

    // a fresh noisy sample pins the state down to roughly the noise floor
    CHECK(t.lookup(0, 1) == Catch::Approx(p.sigma2 * p.b / (p.b + p.sigma2)).epsilon(1e-9));

    // the oscillating correlation makes stale ages informative again: this
    // table must not be monotone in delta, or threshold dips would be untestable
    CHECK_FALSE(t.monotone_in_delta());
}

TEST_CASE("mmse against a hand solve at l = 2") {
    // direct 2x2 solve of (R + sigma2 I) w = c, err = b - c.w
    JakesParams p;
    p.b = 1.5;
    p.f_d = 30.0;
    p.T_s = 1e-3;
    p.sigma2 = 1e-4;
    InferenceErrorTable t = jakes_error_table(p, 2, 10);
    for (long long delta : {0LL, 3LL, 7LL}) {
        double r0 = jakes_autocorr(p, 0) + p.sigma2;
        double r1 = jakes_autocorr(p, 1);
        double c0 = jakes_autocorr(p, delta);
        double c1 = jakes_autocorr(p, delta + 1);
        double det = r0 * r0 - r1 * r1;
        double w0 = (r0 * c0 - r1 * c1) / det;
        double w1 = (r0 * c1 - r1 * c0) / det;
        double expect = std::max(0.0, p.b - (c0 * w0 + c1 * w1));
        CHECK(t.lookup(delta, 2) == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("frozen doppler product for the reference channel") {
    // b=1, v=15 m/s, f_c=2 GHz, T_s=1 ms: f_d T_s = 0.100069...
    JakesParams p = JakesParams::from_speed(1.0, 15.0, 2e9, 1e-3, 1e-6);
    CHECK(p.f_d * p.T_s == Catch::Approx(0.10006922855944562).epsilon(1e-14));
}
