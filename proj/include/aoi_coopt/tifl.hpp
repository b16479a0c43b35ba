#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "aoi_coopt/core.hpp"
#include "aoi_coopt/gamma.hpp"

namespace aoi_coopt {

/// Ties at the threshold (gamma == beta) transmit by default; the alternative
/// direction exists so tests can assert the root is insensitive to it.
enum class ThresholdTie { transmit, wait };

struct CycleStats {
    double cost = 0.0;    // expected sum of per-slot errors over one delivery cycle
    double length = 0.0;  // expected cycle length in slots
};

namespace detail {

/// Smallest tau >= 0 with gamma_l(delta+tau, d) meeting beta; if the threshold
/// is still unmet when delta+tau reaches the saturation row it never will be,
/// so the wait caps there and the policy transmits.
inline long long threshold_wait(const GammaTable& g, int l, long long delta, int d, double beta,
                                ThresholdTie tie = ThresholdTie::transmit) {
    long long cap = std::max<long long>(0, g.delta_bound() - delta);
    for (long long tau = 0; tau < cap; ++tau) {
        double v = g(l, delta + tau, d);
        if (tie == ThresholdTie::transmit ? v >= beta : v > beta) return tau;
    }
    return cap;
}

}  // namespace detail

/**
 * Renewal statistics of one delivery-to-delivery cycle under the
 * threshold-beta rule with fixed (b, l): the cycle opens at delivered age
 * delta0 = t0 + b, waits Z(delta0) slots for the index to reach beta, then
 * spends the next transmission time accruing error. Expectations over both
 * transmission times are exact finite sums.
 */
inline CycleStats cycle_stats(double beta, int b, int l, const SourceConfig& cfg,
                              const GammaTable& g, ThresholdTie tie = ThresholdTie::transmit) {
    if (auto bad = validate_action({0, l, b}, cfg.B, Mode::single))
        throw std::invalid_argument("cycle_stats: " + *bad);
    const auto& sup = cfg.trans.support(l);
    CycleStats out;
    for (const auto& [t0, p0] : sup) {
        long long delta0 = t0 + b;
        long long Z = detail::threshold_wait(g, l, delta0, l, beta, tie);
        double cost = 0.0;
        for (const auto& [t1, p1] : sup) cost += p1 * cfg.table.window_sum(delta0, Z + t1, l);
        out.cost += p0 * cost;
        out.length += p0 * (static_cast<double>(Z) + cfg.trans.mean(l));
    }
    return out;
}

/**
 * The fixed-(b,l) optimal average error beta_{b,l}: unique root of
 * f(beta) = cost(beta) - beta * length(beta), found by bisection on
 * [min table value, max table value]. f is the value of an optimal-stopping
 * problem, continuous, concave and strictly decreasing, and any policy's
 * long-run average lies in the convex hull of per-slot costs, so the bracket
 * always holds a sign change.
 */
inline double solve_beta(int b, int l, const SourceConfig& cfg, const GammaTable& g,
                         ThresholdTie tie = ThresholdTie::transmit) {
    auto f = [&](double beta) {
        CycleStats s = cycle_stats(beta, b, l, cfg, g, tie);
        return s.cost - beta * s.length;
    };
    double lo = cfg.table.min_value(), hi = cfg.table.max_value();
    double flo = f(lo), fhi = f(hi);
    // roots at a bracket end (constant tables) show up as f within rounding
    // of zero rather than a sign change
    if (std::abs(flo) <= 1e-13 * (1.0 + std::abs(lo))) return lo;
    if (std::abs(fhi) <= 1e-13 * (1.0 + std::abs(hi))) return hi;
    if (flo < 0.0 || fhi > 0.0)
        throw SolverError("solve_beta: no sign change on [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "] (malformed table?)");
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/**
 * Solved time-invariant-feature-length policy: transmit with (l_star, b_star)
 * whenever gamma_{l*}(delta, l*) reaches beta_star.
 */
struct TiflPolicy {
    int l_star = 1;
    int b_star = 0;
    double beta_star = 0.0;
    // beta_grid[b][l-1] for legal pairs: b in 0..B-1, l in 1..B-b.
    std::vector<std::vector<double>> beta_grid;
    int B = 1;
    int delta_bound = 1;
    std::shared_ptr<const GammaTable> gamma;  // rebuilt, not serialized

    bool transmit_now(long long delta) const {
        if (delta >= delta_bound) return true;  // wait cap: index saturated below threshold
        return (*gamma)(l_star, delta, l_star) >= beta_star;
    }
};

/// Root for every legal (b, l); argmin with ties toward smaller l, then
/// smaller b. The grid is scanned in a fixed canonical order.
inline TiflPolicy solve_tifl(const SourceConfig& cfg, ThresholdTie tie = ThresholdTie::transmit) {
    TiflPolicy p;
    p.B = cfg.B;
    p.delta_bound = cfg.delta_bound;
    p.gamma = std::make_shared<GammaTable>(cfg.table, cfg.trans, cfg.B);
    p.beta_grid.assign(cfg.B, {});
    for (int b = 0; b < cfg.B; ++b)
        for (int l = 1; l + b <= cfg.B; ++l)
            p.beta_grid[b].push_back(solve_beta(b, l, cfg, *p.gamma, tie));
    bool first = true;
    for (int l = 1; l <= cfg.B; ++l)
        for (int b = 0; l + b <= cfg.B; ++b) {
            double beta = p.beta_grid[b][l - 1];
            if (first || beta < p.beta_star) {
                first = false;
                p.beta_star = beta;
                p.l_star = l;
                p.b_star = b;
            }
        }
    return p;
}

/// Threshold rule at an idle-channel slot; ties transmit.
inline bool tifl_decide(const TiflPolicy& p, const SystemState& s) { return p.transmit_now(s.delta); }

inline nlohmann::json to_json(const TiflPolicy& p) {
    nlohmann::json j;
    j["l_star"] = p.l_star;
    j["b_star"] = p.b_star;
    j["beta_star"] = p.beta_star;
    j["beta_grid"] = p.beta_grid;
    j["B"] = p.B;
    j["delta_bound"] = p.delta_bound;
    return j;
}

/// Restores the serialized fields; the gamma table must be rebuilt from the
/// config by the caller before the policy can decide.
inline TiflPolicy tifl_from_json(const nlohmann::json& j) {
    TiflPolicy p;
    p.l_star = j.at("l_star").get<int>();
    p.b_star = j.at("b_star").get<int>();
    p.beta_star = j.at("beta_star").get<double>();
    p.beta_grid = j.at("beta_grid").get<std::vector<std::vector<double>>>();
    p.B = j.at("B").get<int>();
    p.delta_bound = j.at("delta_bound").get<int>();
    return p;
}

}  // namespace aoi_coopt
