#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "aoi_coopt/error_table.hpp"

namespace aoi_coopt {

/**
 * Zeroth-order Bessel function of the first kind.
 *
 * Abramowitz & Stegun 9.4.1 polynomial for |x| <= 3 and 9.4.3
 * amplitude/phase asymptotic form for |x| > 3. Combined absolute error is
 * below 1e-7 everywhere (5e-8 for the small-x polynomial; the large-x form
 * carries 1.6e-8 on the amplitude and 7e-8 on the phase, which the x^(-1/2)
 * envelope shrinks further). The unit tests pin this bound against a
 * high-precision power-series oracle.
 */
inline double bessel_j0(double x) {
    double ax = std::fabs(x);
    if (ax <= 3.0) {
        double t = (ax / 3.0) * (ax / 3.0);
        return 1.0 +
               t * (-2.2499997 +
                    t * (1.2656208 +
                         t * (-0.3163866 +
                              t * (0.0444479 + t * (-0.0039444 + t * 0.0002100)))));
    }
    double u = 3.0 / ax;
    double f0 = 0.79788456 +
                u * (-0.00000077 +
                     u * (-0.00552740 +
                          u * (-0.00009512 +
                               u * (0.00137237 + u * (-0.00072805 + u * 0.00014476)))));
    double th = ax - 0.78539816 +
                u * (-0.04166397 +
                     u * (-0.00003954 +
                          u * (0.00262573 +
                               u * (-0.00054125 + u * (-0.00029333 + u * 0.00013558)))));
    return f0 * std::cos(th) / std::sqrt(ax);
}

constexpr double kSpeedOfLight = 299792458.0;  // m/s

/**
 * Fading-process parameters for the Jakes/Clarke autocorrelation
 * r(k) = b * J0(2 pi f_d T_s |k|).
 *
 * sigma2 is the white observation-noise variance added to each buffered
 * sample; it must stay at or above 1e-12 so the MMSE normal equations remain
 * positive definite.
 */
struct JakesParams {
    double b = 1.0;       // process variance
    double f_d = 0.0;     // max Doppler shift, Hz
    double T_s = 1e-3;    // sampling period, s
    double sigma2 = 1e-6; // observation-noise variance

    static JakesParams from_speed(double b, double v, double f_c, double T_s, double sigma2) {
        JakesParams p;
        p.b = b;
        p.f_d = v * f_c / kSpeedOfLight;
        p.T_s = T_s;
        p.sigma2 = sigma2;
        p.validate();
        return p;
    }

    void validate() const {
        if (!(b > 0)) throw std::invalid_argument("jakes: b must be > 0");
        if (!(sigma2 >= 1e-12))
            throw std::invalid_argument("jakes: sigma2 must be >= 1e-12 (SPD floor)");
        if (!(f_d >= 0)) throw std::invalid_argument("jakes: f_d must be >= 0");
        if (!(T_s > 0)) throw std::invalid_argument("jakes: T_s must be > 0");
    }
};

inline double jakes_autocorr(const JakesParams& p, long long k) {
    return p.b * bessel_j0(2.0 * M_PI * p.f_d * p.T_s * std::llabs(k));
}

/**
 * Analytic inference-error table: err(delta, l) is the linear MMSE of the
 * current channel state given the l noisy samples aged delta..delta+l-1,
 *   err = r(0) - c^T (R + sigma2 I)^{-1} c,
 * with c_i = r(delta+i) and R_ij = r(|i-j|), solved per entry by Cholesky.
 */
inline InferenceErrorTable jakes_error_table(const JakesParams& p, int B, int delta_bound) {
    p.validate();
    if (B < 1 || delta_bound < 1)
        throw std::invalid_argument("jakes_error_table: dimensions must be positive");
    // r depends on lag only; the largest lag used is delta_bound + B - 1.
    std::vector<double> r(delta_bound + B, 0.0);
    for (int k = 0; k < static_cast<int>(r.size()); ++k) r[k] = jakes_autocorr(p, k);

    std::vector<double> values(static_cast<size_t>(delta_bound + 1) * B, 0.0);
    for (int l = 1; l <= B; ++l) {
        Eigen::MatrixXd R(l, l);
        for (int i = 0; i < l; ++i)
            for (int j = 0; j < l; ++j) R(i, j) = r[std::abs(i - j)] + (i == j ? p.sigma2 : 0.0);
        Eigen::LLT<Eigen::MatrixXd> llt(R);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("jakes_error_table: SPD factorization failed at l=" +
                                     std::to_string(l));
        Eigen::VectorXd c(l);
        for (int delta = 0; delta <= delta_bound; ++delta) {
            for (int i = 0; i < l; ++i) c(i) = r[delta + i];
            double err = p.b - c.dot(llt.solve(c));
            if (!std::isfinite(err))
                throw std::runtime_error("jakes_error_table: non-finite MMSE at delta=" +
                                         std::to_string(delta) + ", l=" + std::to_string(l));
            values[static_cast<size_t>(delta) * B + (l - 1)] = std::max(0.0, err);
        }
    }
    return InferenceErrorTable(B, delta_bound, std::move(values));
}

}  // namespace aoi_coopt
