#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "aoi_coopt/core.hpp"
#include "aoi_coopt/error_table.hpp"

namespace aoi_coopt {

/// One source of the shared-channel system. Delivery always takes one slot,
/// so unlike the single-source config there is no transmission model.
struct MultiSource {
    InferenceErrorTable table;
    int B = 1;
    int delta_bound = 1;

    MultiSource(InferenceErrorTable t, int B_, int delta_bound_)
        : table(t.truncated(B_, delta_bound_)), B(B_), delta_bound(delta_bound_) {
        if (delta_bound < B)
            throw std::invalid_argument("MultiSource: delta_bound must cover post-delivery ages (>= B)");
    }

    bool same_type(const MultiSource& o) const {
        return B == o.B && delta_bound == o.delta_bound && table == o.table;
    }
};

struct DualParams {
    double beta = 1e-4;    // step scale; iteration k uses beta / k
    double theta = 1e-6;   // stop when |lambda(k+1) - lambda(k)| <= theta
    double lambda0 = 0.0;
};

struct MultiConfig {
    int N = 1;  // channel budget per slot
    std::vector<MultiSource> sources;
    DualParams dual;

    MultiConfig(int N_, std::vector<MultiSource> sources_, DualParams dual_ = {})
        : N(N_), sources(std::move(sources_)), dual(dual_) {
        if (N < 1 || sources.empty()) throw std::invalid_argument("MultiConfig: need N >= 1 and M >= 1");
    }
};

/// {"N": int, "sources": [{"B", "table", "delta_bound"}, ...], "dual": {"beta", "theta", "lambda0"}}
/// with table paths resolved against base_dir.
inline MultiConfig load_multi_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    std::vector<MultiSource> sources;
    for (const auto& s : j.at("sources")) {
        auto table = load_csv((base_dir / s.at("table").get<std::string>()).string());
        sources.emplace_back(std::move(table), s.at("B").get<int>(), s.at("delta_bound").get<int>());
    }
    DualParams dual;
    if (j.contains("dual")) {
        const auto& d = j.at("dual");
        if (d.contains("beta")) dual.beta = d.at("beta").get<double>();
        if (d.contains("theta")) dual.theta = d.at("theta").get<double>();
        if (d.contains("lambda0")) dual.lambda0 = d.at("lambda0").get<double>();
    }
    return MultiConfig(j.at("N").get<int>(), std::move(sources), dual);
}

/**
 * Solved per-source quantities at a dual price: relative values h over
 * (delta, d) anchored to 0 at (1, 1), the best landing position per length,
 * and the optimal average cost of the priced chain (lambda charges included).
 * The net-gain tensor is the function alpha() below, not stored.
 */
struct SourceValueTables {
    int B = 1;
    int delta_bound = 1;
    double lambda = 0.0;
    double p_bar = 0.0;
    std::vector<double> h;   // (delta-1)*B + (d-1)
    std::vector<int> b_hat;  // [l-1] for l = 1..B

    double h_at(long long delta, int d) const {
        if (d < 1 || d > B) throw std::out_of_range("SourceValueTables: d out of range");
        long long dc = std::clamp<long long>(delta, 1, delta_bound);
        return h[static_cast<std::size_t>(dc - 1) * B + (d - 1)];
    }
    double alpha(long long delta, int d, int l) const { return net_gain(*this, lambda, delta, d, l); }

    /// Loss reduction of transmitting l at its best position instead of idling,
    /// priced at lambda per unit length. l = 0 compares idle with itself.
    friend double net_gain(const SourceValueTables& t, double lambda, long long delta, int d, int l) {
        if (l == 0) return 0.0;
        if (l < 1 || l > t.B) throw std::out_of_range("net_gain: l out of range");
        return t.h_at(delta + 1, d) - t.h_at(t.b_hat[l - 1] + 1, l) - lambda * l;
    }
};

/// Argmin over b of h(b+1, l); ties toward smaller b.
inline int best_position(const SourceValueTables& t, int l) {
    if (l < 1 || l > t.B) throw std::out_of_range("best_position: l out of range");
    int best = 0;
    for (int b = 1; l + b <= t.B; ++b)
        if (t.h_at(b + 1, l) < t.h_at(best + 1, l)) best = b;
    return best;
}

struct RviOptions {
    double span_tol = 1e-8;      // span of successive value differences
    double residual_tol = 5e-7;  // Bellman residual of the unscaled equation
    long long max_sweeps = 1000000;
    double eta = 0.5;            // stay-probability transform weight
};

/**
 * Relative value iteration for the priced per-slot MDP: idle keeps (delta, d)
 * aging, transmitting (l, b) costs lambda*l and lands at (b+1, l) next slot.
 * Sweeps use the aperiodicity transform (stay with weight 1-eta, move with
 * eta, costs unscaled), which preserves the gain and scales the bias by
 * 1/eta; the returned h is rescaled back. Stops once the span of successive
 * differences is within span_tol and the untransformed Bellman residual is
 * within residual_tol.
 */
inline SourceValueTables rvi_source(const MultiSource& src, double lambda,
                                    const RviOptions& opt = {},
                                    const std::vector<double>* warm = nullptr) {
    if (lambda < 0.0) throw std::invalid_argument("rvi_source: lambda must be >= 0");
    const int B = src.B;
    const long long D = src.delta_bound;
    const std::size_t n = static_cast<std::size_t>(D) * B;
    auto at = [B](long long delta, int d) { return static_cast<std::size_t>(delta - 1) * B + (d - 1); };
    const std::size_t anchor = at(1, 1);

    std::vector<double> h(n, 0.0);
    if (warm && warm->size() == n) h = *warm;
    std::vector<double> fresh(n, 0.0), land(B + 1, 0.0);
    double gain = 0.0;

    // scale damps the motion only; the price is an instantaneous cost and is
    // charged in full (scale = eta for the transformed sweep, 1 for the
    // original-equation residual)
    auto bellman_min = [&](const std::vector<double>& v, long long delta, int d, double scale) {
        double best = scale * v[at(std::min(delta + 1, D), d)];  // idle
        for (int l = 1; l <= B; ++l) best = std::min(best, lambda * l + scale * land[l]);
        return best;
    };
    auto refresh_landings = [&](const std::vector<double>& v) {
        for (int l = 1; l <= B; ++l) {
            land[l] = v[at(1, l)];
            for (int b = 1; l + b <= B; ++b) land[l] = std::min(land[l], v[at(b + 1, l)]);
        }
    };

    double span = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity();
    for (long long sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        refresh_landings(h);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (long long delta = 1; delta <= D; ++delta)
            for (int d = 1; d <= B; ++d) {
                std::size_t i = at(delta, d);
                fresh[i] = src.table.lookup(delta, d) + (1.0 - opt.eta) * h[i] +
                           bellman_min(h, delta, d, opt.eta);
                double diff = fresh[i] - h[i];
                lo = std::min(lo, diff);
                hi = std::max(hi, diff);
            }
        span = hi - lo;
        gain = 0.5 * (hi + lo);
        double shift = fresh[anchor];
        for (std::size_t i = 0; i < n; ++i) h[i] = fresh[i] - shift;
        if (span <= opt.span_tol) {
            // check the equation the caller cares about, at original scale
            std::vector<double> horig(n);
            for (std::size_t i = 0; i < n; ++i) horig[i] = opt.eta * h[i];
            refresh_landings(horig);
            residual = 0.0;
            for (long long delta = 1; delta <= D; ++delta)
                for (int d = 1; d <= B; ++d) {
                    double rhs = src.table.lookup(delta, d) + bellman_min(horig, delta, d, 1.0);
                    residual = std::max(residual, std::abs(gain + horig[at(delta, d)] - rhs));
                }
            if (residual <= opt.residual_tol) {
                SourceValueTables out;
                out.B = B;
                out.delta_bound = static_cast<int>(D);
                out.lambda = lambda;
                out.p_bar = gain;
                out.h = std::move(horig);
                out.b_hat.resize(B);
                for (int l = 1; l <= B; ++l) out.b_hat[l - 1] = best_position(out, l);
                return out;
            }
        }
    }
    throw SolverError("rvi_source: no convergence after " + std::to_string(opt.max_sweeps) +
                      " sweeps (span " + std::to_string(span) + ", residual " +
                      std::to_string(residual) + ")");
}

/**
 * Multiple-choice knapsack: each source picks one length from {0..B_j}
 * maximizing total gain subject to sum <= N. Ties prefer the smaller total
 * length, then the lexicographically smallest assignment. Suffix DP over
 * (source, remaining capacity), forward reconstruction taking the smallest
 * consistent length first.
 */
inline std::vector<int> knapsack_select(const std::vector<std::vector<double>>& gains, int N) {
    const int M = static_cast<int>(gains.size());
    if (N < 0) throw std::invalid_argument("knapsack_select: negative capacity");
    for (const auto& g : gains) {
        if (g.empty() || g[0] != 0.0)
            throw std::invalid_argument("knapsack_select: gain vector must start with 0 at l = 0");
        for (double v : g)
            if (!std::isfinite(v)) throw std::invalid_argument("knapsack_select: non-finite gain");
    }
    struct Cell {
        double value = 0.0;
        int length = 0;  // total channel use achieving value
    };
    auto better = [](const Cell& a, const Cell& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.length < b.length;
    };
    // best[j][c]: optimum over sources j..M-1 with capacity c
    std::vector<std::vector<Cell>> best(M + 1, std::vector<Cell>(N + 1));
    for (int j = M - 1; j >= 0; --j) {
        const int Bj = static_cast<int>(gains[j].size()) - 1;
        for (int c = 0; c <= N; ++c) {
            Cell acc;  // l = 0 candidate
            acc.value = best[j + 1][c].value;
            acc.length = best[j + 1][c].length;
            for (int l = 1; l <= std::min(Bj, c); ++l) {
                Cell cand{gains[j][l] + best[j + 1][c - l].value, l + best[j + 1][c - l].length};
                if (better(cand, acc)) acc = cand;
            }
            best[j][c] = acc;
        }
    }
    std::vector<int> pick(M, 0);
    int c = N;
    for (int j = 0; j < M; ++j) {
        const int Bj = static_cast<int>(gains[j].size()) - 1;
        const Cell& target = best[j][c];
        for (int l = 0; l <= std::min(Bj, c); ++l) {
            double v = gains[j][l] + best[j + 1][c - l].value;
            int len = l + best[j + 1][c - l].length;
            if (v == target.value && len == target.length) {
                pick[j] = l;
                c -= l;
                break;
            }
        }
    }
    return pick;
}

struct MultiPolicy {
    double lambda_star = 0.0;
    std::vector<SourceValueTables> per_source;  // index matches MultiConfig::sources
};

inline nlohmann::json to_json(const MultiPolicy& p) {
    nlohmann::json j;
    j["lambda_star"] = p.lambda_star;
    j["sources"] = nlohmann::json::array();
    for (const auto& t : p.per_source) {
        nlohmann::json s;
        s["B"] = t.B;
        s["delta_bound"] = t.delta_bound;
        s["lambda"] = t.lambda;
        s["p_bar"] = t.p_bar;
        s["h"] = t.h;
        s["b_hat"] = t.b_hat;
        j["sources"].push_back(std::move(s));
    }
    return j;
}

inline MultiPolicy multi_from_json(const nlohmann::json& j) {
    MultiPolicy p;
    p.lambda_star = j.at("lambda_star").get<double>();
    for (const auto& s : j.at("sources")) {
        SourceValueTables t;
        t.B = s.at("B").get<int>();
        t.delta_bound = s.at("delta_bound").get<int>();
        t.lambda = s.at("lambda").get<double>();
        t.p_bar = s.at("p_bar").get<double>();
        t.h = s.at("h").get<std::vector<double>>();
        t.b_hat = s.at("b_hat").get<std::vector<int>>();
        if (t.h.size() != static_cast<std::size_t>(t.delta_bound) * t.B ||
            t.b_hat.size() != static_cast<std::size_t>(t.B))
            throw std::invalid_argument("MultiPolicy json: dimension mismatch");
        p.per_source.push_back(std::move(t));
    }
    return p;
}

/// Relaxed per-source choice at the given price: argmax over l of the net
/// gain, idle on exact ties, landing position from the tables.
inline Action relaxed_action(const SourceValueTables& t, double lambda, const SystemState& s) {
    int best_l = 0;
    double best_v = 0.0;
    for (int l = 1; l <= t.B; ++l) {
        double v = net_gain(t, lambda, s.delta, s.d, l);
        if (v > best_v) {
            best_v = v;
            best_l = l;
        }
    }
    return {0, best_l, best_l >= 1 ? t.b_hat[best_l - 1] : 0};
}

struct DualOptions {
    long long min_iters = 1000;   // |dlambda| <= theta can hold transiently; see ledger
    long long max_iters = 1000000;
    double eps_lambda = 1e-4;     // re-solve trigger; tables warm-start from the last solve
    RviOptions rvi{};
};

namespace detail {

/// sources sharing (B, delta_bound, table) resolve to one representative index
inline std::vector<int> type_of(const std::vector<MultiSource>& sources) {
    std::vector<int> type(sources.size());
    for (std::size_t j = 0; j < sources.size(); ++j) {
        type[j] = static_cast<int>(j);
        for (std::size_t k = 0; k < j; ++k)
            if (sources[k].same_type(sources[j])) {
                type[j] = type[k];
                break;
            }
    }
    return type;
}

inline void advance_source(const MultiSource& src, SystemState& s, const Action& a) {
    if (a.l >= 1) {
        s.delta = std::min<long long>(1 + a.b, src.delta_bound);
        s.d = a.l;
    } else {
        s.delta = std::min<long long>(s.delta + 1, src.delta_bound);
    }
}

}  // namespace detail

struct DualResult {
    double lambda_star = 0.0;
    long long iters = 0;
    MultiPolicy policy;  // tables re-solved at lambda_star
};

/**
 * Subgradient ascent on the dual price: simulate the decoupled sources under
 * their relaxed policies at the current price, move lambda by
 * (beta/k) * (used channels - N) clamped at 0, stop once the move is within
 * theta (after min_iters; the subgradient can vanish transiently when a slot
 * happens to use exactly N channels). Value tables are re-solved, warm
 * started, whenever lambda drifts more than eps_lambda from the last solve,
 * and once more at the final price.
 */
inline DualResult dual_ascent(const MultiConfig& cfg, const DualOptions& opt = {}) {
    const auto type = detail::type_of(cfg.sources);
    std::vector<SourceValueTables> tables(cfg.sources.size());
    auto solve_types = [&](double lambda, bool warm) {
        for (std::size_t j = 0; j < cfg.sources.size(); ++j) {
            if (type[j] != static_cast<int>(j)) continue;
            const std::vector<double>* w = warm ? &tables[j].h : nullptr;
            tables[j] = rvi_source(cfg.sources[j], lambda, opt.rvi, w);
        }
        for (std::size_t j = 0; j < cfg.sources.size(); ++j)
            if (type[j] != static_cast<int>(j)) tables[j] = tables[type[j]];
    };

    double lambda = cfg.dual.lambda0;
    solve_types(lambda, false);
    double lambda_solved = lambda;

    std::vector<SystemState> states(cfg.sources.size(), SystemState{1, 1});
    DualResult out;
    for (long long k = 1; k <= opt.max_iters; ++k) {
        long long used = 0;
        std::vector<Action> acts(cfg.sources.size());
        for (std::size_t j = 0; j < cfg.sources.size(); ++j) {
            acts[j] = relaxed_action(tables[j], lambda, states[j]);
            used += acts[j].l;
        }
        double next = std::max(lambda + (cfg.dual.beta / k) * (static_cast<double>(used) - cfg.N), 0.0);
        for (std::size_t j = 0; j < cfg.sources.size(); ++j)
            detail::advance_source(cfg.sources[j], states[j], acts[j]);
        bool settled = std::abs(next - lambda) <= cfg.dual.theta && k >= opt.min_iters;
        lambda = next;
        out.iters = k;
        if (settled) break;
        if (std::abs(lambda - lambda_solved) > opt.eps_lambda) {
            solve_types(lambda, true);
            lambda_solved = lambda;
        }
        if (k == opt.max_iters)
            throw SolverError("dual_ascent: no convergence after " +
                              std::to_string(opt.max_iters) + " iterations");
    }
    out.lambda_star = lambda;
    solve_types(lambda, true);
    out.policy.lambda_star = lambda;
    out.policy.per_source = std::move(tables);
    return out;
}

/// Knapsack assignment over the per-state net gains; never advances states.
inline std::vector<Action> net_gain_actions(const MultiConfig& cfg, const MultiPolicy& pol,
                                            const std::vector<SystemState>& states) {
    std::vector<std::vector<double>> gains(cfg.sources.size());
    for (std::size_t j = 0; j < cfg.sources.size(); ++j) {
        const auto& t = pol.per_source[j];
        gains[j].resize(t.B + 1, 0.0);
        for (int l = 1; l <= t.B; ++l)
            gains[j][l] = net_gain(t, pol.lambda_star, states[j].delta, states[j].d, l);
    }
    auto pick = knapsack_select(gains, cfg.N);
    long long used = 0;
    std::vector<Action> acts(cfg.sources.size());
    for (std::size_t j = 0; j < cfg.sources.size(); ++j) {
        int l = pick[j];
        acts[j] = {0, l, l >= 1 ? pol.per_source[j].b_hat[l - 1] : 0};
        used += l;
    }
    if (used > cfg.N) throw std::logic_error("net_gain_actions: channel budget exceeded");
    return acts;
}

/// One slot of the channel-constrained policy: decide, then apply the
/// delivery dynamics to every source.
inline std::vector<Action> net_gain_policy_step(const MultiConfig& cfg, const MultiPolicy& pol,
                                                std::vector<SystemState>& states) {
    auto acts = net_gain_actions(cfg, pol, states);
    for (std::size_t j = 0; j < cfg.sources.size(); ++j)
        detail::advance_source(cfg.sources[j], states[j], acts[j]);
    return acts;
}

/**
 * Average total inference error of the decoupled system under the relaxed
 * policies at lambda_star, each source simulated independently (the channel
 * constraint is ignored, which is what makes this a lower bound in
 * expectation). Price charges are solver-internal and excluded. The first
 * warmup fraction of slots is discarded. The dynamics are deterministic, so
 * the seed parameter is unused and kept for interface parity with the
 * stochastic simulators.
 */
inline double lower_bound_eval(const MultiConfig& cfg, const MultiPolicy& pol, long long horizon,
                               unsigned long long /*seed*/ = 0, double warmup = 0.01) {
    if (horizon <= 0) throw std::invalid_argument("lower_bound_eval: horizon must be positive");
    long long skip = static_cast<long long>(warmup * static_cast<double>(horizon));
    double total = 0.0;
    for (std::size_t j = 0; j < cfg.sources.size(); ++j) {
        const auto& t = pol.per_source[j];
        SystemState s{1, 1};
        double acc = 0.0;
        long long counted = 0;
        for (long long slot = 0; slot < horizon; ++slot) {
            if (slot >= skip) {
                acc += cfg.sources[j].table.lookup(s.delta, s.d);
                ++counted;
            }
            Action a = relaxed_action(t, pol.lambda_star, s);
            detail::advance_source(cfg.sources[j], s, a);
        }
        total += acc / static_cast<double>(counted);
    }
    return total;
}

}  // namespace aoi_coopt
