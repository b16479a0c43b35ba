#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "json.hpp"

#include "aoi_coopt/core.hpp"
#include "aoi_coopt/gamma.hpp"
#include "aoi_coopt/tifl.hpp"

namespace aoi_coopt {

/// Smallest tau >= 0 with gamma_l(delta+tau, d) >= p_bar, capped at
/// delta_bound - delta (the saturated index never rises further).
inline long long wait_threshold(const GammaTable& g, int l, long long delta, int d, double p_bar) {
    return detail::threshold_wait(g, l, delta, d, p_bar, ThresholdTie::transmit);
}

/**
 * State-feedback policy over (delta, d) with delta in 1..delta_bound and
 * d in 1..B: wait Z, feature length l, position b, relative values h, and
 * the long-run average error p_bar. h is anchored to 0 at (1, 1).
 */
struct TvflPolicy {
    int B = 1;
    int delta_bound = 1;
    double p_bar = 0.0;
    std::vector<int> Z, l, b;   // indexed (delta-1)*B + (d-1)
    std::vector<double> h;

    std::size_t idx(long long delta, int d) const {
        if (d < 1 || d > B) throw std::out_of_range("TvflPolicy: d out of range");
        long long dc = std::clamp<long long>(delta, 1, delta_bound);
        return static_cast<std::size_t>(dc - 1) * B + (d - 1);
    }
    Action action_at(long long delta, int d) const {
        std::size_t i = idx(delta, d);
        return {Z[i], l[i], b[i]};
    }
    double h_at(long long delta, int d) const { return h[idx(delta, d)]; }
};

struct TvflOptions {
    int max_outer = 1000;  // policy-iteration round cap
};

namespace detail {

struct StageData {
    double cost = 0.0;    // expected error accrued over wait + transmission
    double length = 0.0;  // expected slots per stage
    std::vector<std::pair<std::size_t, double>> next;  // (state index, probability)
};

inline StageData stage_entry(const TvflPolicy& p, const SourceConfig& cfg, long long delta, int d,
                             int Z, int l, int b) {
    StageData s;
    for (const auto& [t, pt] : cfg.trans.support(l)) {
        s.cost += pt * cfg.table.window_sum(delta, Z + t, d);
        s.next.emplace_back(p.idx(t + b, l), pt);
    }
    s.length = Z + cfg.trans.mean(l);
    return s;
}

/// Bellman stage value of one fully specified action at (delta, d).
inline double action_value(const TvflPolicy& p, const SourceConfig& cfg, long long delta, int d,
                           int Z, int l, int b) {
    StageData s = stage_entry(p, cfg, delta, d, Z, l, b);
    double e = 0.0;
    for (const auto& [j, pr] : s.next) e += pr * p.h[j];
    return s.cost - p.p_bar * s.length + e;
}

/// Retention margin for action switches: distinct routes through the same
/// error windows tie exactly in real arithmetic but differ by rounding, and
/// switching on that noise flaps forever. Scale-relative, far below any
/// genuine improvement the tables can express.
inline double switch_tol(double incumbent_value) {
    return 1e-12 * (1.0 + std::abs(incumbent_value));
}

inline std::vector<StageData> stage_data(const TvflPolicy& p, const SourceConfig& cfg) {
    std::vector<StageData> out(p.Z.size());
    for (long long delta = 1; delta <= p.delta_bound; ++delta)
        for (int d = 1; d <= p.B; ++d) {
            std::size_t i = p.idx(delta, d);
            Action a{p.Z[i], p.l[i], p.b[i]};
            if (auto bad = validate_action(a, cfg.B, Mode::single))
                throw std::invalid_argument("policy_evaluate: illegal action at (delta=" +
                                            std::to_string(delta) + ", d=" + std::to_string(d) +
                                            "): " + *bad);
            out[i] = stage_entry(p, cfg, delta, d, a.Z, a.l, a.b);
        }
    return out;
}

/**
 * Exact solve of the evaluation equations over one set of states closed
 * under the stage transitions (a closed class, or the whole space):
 *   h(i) + gain * length(i) - E[h(next(i))] = cost(i),   h(members[0]) = 0.
 * One linear system in the member h values and the gain; unichain dynamics
 * make it nonsingular. Returns the gain; writes member values into *h_out
 * (global indexing) when given. A chain with several closed classes has no
 * single-gain solution, which surfaces as a singular system.
 */
inline double linear_evaluate(const std::vector<StageData>& st,
                              const std::vector<std::size_t>& members, std::size_t total,
                              std::vector<double>* h_out) {
    const std::size_t m = members.size();
    std::vector<long long> local(total, -1);
    for (std::size_t k = 0; k < m; ++k) local[members[k]] = static_cast<long long>(k);
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs(m + 1);
    for (std::size_t k = 0; k < m; ++k) {
        const StageData& s = st[members[k]];
        trips.emplace_back(static_cast<int>(k), static_cast<int>(k), 1.0);
        for (const auto& [j, pr] : s.next) {
            if (local[j] < 0)
                throw SolverError("policy_evaluate: stage transition leaves the state set");
            trips.emplace_back(static_cast<int>(k), static_cast<int>(local[j]), -pr);
        }
        trips.emplace_back(static_cast<int>(k), static_cast<int>(m), s.length);
        rhs(static_cast<Eigen::Index>(k)) = s.cost;
    }
    trips.emplace_back(static_cast<int>(m), 0, 1.0);
    rhs(static_cast<Eigen::Index>(m)) = 0.0;
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(m) + 1,
                                  static_cast<Eigen::Index>(m) + 1);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    Eigen::VectorXd y;
    bool ok = lu.info() == Eigen::Success;
    if (ok) {
        y = lu.solve(rhs);
        ok = y.allFinite();
    }
    if (ok) {
        // singular systems can pass LU numerically; the residual cannot
        double scale = 1.0 + rhs.cwiseAbs().maxCoeff() + y.cwiseAbs().maxCoeff();
        ok = (A * y - rhs).cwiseAbs().maxCoeff() <= 1e-9 * scale;
    }
    if (!ok)
        throw SolverError("policy_evaluate: singular evaluation system (chain not unichain?)");
    if (h_out)
        for (std::size_t k = 0; k < m; ++k)
            (*h_out)[members[k]] = y(static_cast<Eigen::Index>(k));
    return y(static_cast<Eigen::Index>(m));
}

}  // namespace detail

/**
 * Average error and relative values of the given action maps: the exact
 * solution of
 *   h(delta,d) = cost - p_bar * length + E[h(next)],   h(1,1) = 0,
 * with p_bar read off the anchor row (expected stage cost plus expected
 * next-state value over expected stage length, the same identity the
 * anchor equation reduces to). Solved as one sparse linear system rather
 * than by fixed-point sweeps: the sweep multiplies a self-loop error term
 * by 1 - length per pass, so any stage longer than two slots diverges, and
 * no fixed damping factor is stable for every legal policy.
 */
inline void policy_evaluate(TvflPolicy& p, const SourceConfig& cfg) {
    const std::size_t n = static_cast<std::size_t>(p.delta_bound) * p.B;
    p.h.assign(n, 0.0);
    auto stages = detail::stage_data(p, cfg);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    // idx(1,1) == 0, so the anchor heads the member list
    p.p_bar = detail::linear_evaluate(stages, all, n, &p.h);
}

namespace detail {

/// Strongly connected components of the landing graph (Tarjan, explicit
/// stack). Fills comp with component ids and returns the component count.
inline int scc_components(const std::vector<std::vector<std::size_t>>& adj,
                          std::vector<int>& comp) {
    const std::size_t n = adj.size();
    comp.assign(n, -1);
    std::vector<int> low(n, 0), num(n, -1);
    std::vector<std::size_t> stack;
    std::vector<char> on_stack(n, 0);
    std::vector<std::pair<std::size_t, std::size_t>> call;  // (node, next edge)
    int timer = 0, count = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (num[root] != -1) continue;
        num[root] = low[root] = timer++;
        stack.push_back(root);
        on_stack[root] = 1;
        call.emplace_back(root, 0);
        while (!call.empty()) {
            std::size_t v = call.back().first;
            std::size_t ei = call.back().second;
            if (ei < adj[v].size()) {
                call.back().second = ei + 1;
                std::size_t w = adj[v][ei];
                if (num[w] == -1) {
                    num[w] = low[w] = timer++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.emplace_back(w, 0);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], num[w]);
                }
            } else {
                if (low[v] == num[v]) {
                    while (true) {
                        std::size_t w = stack.back();
                        stack.pop_back();
                        on_stack[w] = 0;
                        comp[w] = count;
                        if (w == v) break;
                    }
                    ++count;
                }
                call.pop_back();
                if (!call.empty()) {
                    std::size_t u = call.back().first;
                    low[u] = std::min(low[u], low[v]);
                }
            }
        }
    }
    return count;
}

/// Expected value of landing at (T + b, l), minimized over b. Independent of
/// the deciding state, so computed once per improvement pass.
struct LandingChoice {
    int b = 0;
    double value = 0.0;
};

inline std::vector<LandingChoice> best_landings(const TvflPolicy& p, const SourceConfig& cfg) {
    std::vector<LandingChoice> out(cfg.B + 1);
    for (int l = 1; l <= cfg.B; ++l) {
        LandingChoice best;
        bool first = true;
        for (int b = 0; l + b <= cfg.B; ++b) {
            double v = 0.0;
            for (const auto& [t, pt] : cfg.trans.support(l)) v += pt * p.h_at(t + b, l);
            if (first || v < best.value) {
                first = false;
                best = {b, v};
            }
        }
        out[l] = best;
    }
    return out;
}

/// Decomposed one-stage value of choosing length l at (delta, d): wait,
/// expected error over wait + transmission net of p_bar, plus the best
/// landing value for l.
struct StageChoice {
    long long Z = 0;
    double cost = 0.0;
};

inline StageChoice stage_choice(const TvflPolicy& p, const SourceConfig& cfg, const GammaTable& g,
                                long long delta, int d, int l, double land_value) {
    auto value = [&](long long Z) {
        double cost = 0.0;
        for (const auto& [t, pt] : cfg.trans.support(l))
            cost += pt * cfg.table.window_sum(delta, Z + t, d);
        return cost - p.p_bar * (static_cast<double>(Z) + cfg.trans.mean(l)) + land_value;
    };
    long long Z = wait_threshold(g, l, delta, d, p.p_bar);
    if (g(l, delta + Z, d) >= p.p_bar) return {Z, value(Z)};
    // The threshold set is empty: gamma saturates below p_bar, which happens
    // at intermediate gains above the saturated index. The first crossing is
    // vacuous there, and quietly waiting out the cap can freeze the iteration
    // in a self-consistent non-optimum, so scan the capped waits instead.
    // Where a crossing exists it already is the smallest argmin, so the two
    // branches tie-break identically.
    StageChoice best{0, value(0)};
    for (long long z = 1; delta + z <= g.delta_bound(); ++z) {
        double v = value(z);
        if (v < best.cost) best = {z, v};
    }
    return best;
}

}  // namespace detail

/**
 * Greedy improvement against (h, p_bar): per state the length minimizing the
 * decomposed stage cost (ties to smaller l), its best landing position (ties
 * to smaller b), and the stage-optimal wait. A state keeps its stored action
 * unless the best candidate wins by more than a roundoff-scale margin, so
 * exactly tied routes cannot flap on rounding noise and the outer iteration
 * terminates. The unrestricted greedy map can split the decision chain into
 * several closed classes (each display length feeding itself), which the
 * single-gain evaluation cannot price, so the map is repaired before being
 * stored: the closed class with the smallest gain survives, and every state
 * outside it is re-improved over the actions that drain into the surviving
 * set. Returns how many states changed.
 */
inline int policy_improve(TvflPolicy& p, const SourceConfig& cfg, const GammaTable& g) {
    const std::size_t n = p.Z.size();
    const int B = p.B;
    auto landings = detail::best_landings(p, cfg);

    std::vector<int> tl(n), tb(n), tZ(n);
    auto state_of = [&](std::size_t i) {
        return std::pair<long long, int>{static_cast<long long>(i) / B + 1,
                                         static_cast<int>(i % B) + 1};
    };
    for (std::size_t i = 0; i < n; ++i) {
        auto [delta, d] = state_of(i);
        int best_l = 1;
        detail::StageChoice best;
        for (int l = 1; l <= cfg.B; ++l) {
            auto c = detail::stage_choice(p, cfg, g, delta, d, l, landings[l].value);
            if (l == 1 || c.cost < best.cost) {
                best = c;
                best_l = l;
            }
        }
        double inc = detail::action_value(p, cfg, delta, d, p.Z[i], p.l[i], p.b[i]);
        if (inc <= best.cost + detail::switch_tol(inc)) {
            tl[i] = p.l[i];
            tb[i] = p.b[i];
            tZ[i] = p.Z[i];
        } else {
            tl[i] = best_l;
            tb[i] = landings[best_l].b;
            tZ[i] = static_cast<int>(best.Z);
        }
    }

    auto landing_states = [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (const auto& [t, pt] : cfg.trans.support(tl[i])) out.push_back(p.idx(t + tb[i], tl[i]));
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    };
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i) adj[i] = landing_states(i);

    std::vector<int> comp;
    int comps = detail::scc_components(adj, comp);
    std::vector<char> closed(comps, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t w : adj[i])
            if (comp[w] != comp[i]) closed[comp[i]] = 0;
    std::vector<std::vector<std::size_t>> classes(comps);
    for (std::size_t i = 0; i < n; ++i)
        if (closed[comp[i]]) classes[comp[i]].push_back(i);

    int n_closed = 0;
    for (int c = 0; c < comps; ++c) n_closed += closed[c] ? 1 : 0;
    if (n_closed > 1) {
        std::vector<detail::StageData> st(n);
        for (int c = 0; c < comps; ++c)
            for (std::size_t i : classes[c]) {
                auto [delta, d] = state_of(i);
                st[i] = detail::stage_entry(p, cfg, delta, d, tZ[i], tl[i], tb[i]);
            }
        int best_c = -1;
        double best_gain = 0.0;
        for (int c = 0; c < comps; ++c) {
            if (!closed[c]) continue;
            double gc = detail::linear_evaluate(st, classes[c], n, nullptr);
            if (best_c < 0 || gc < best_gain) {
                best_c = c;
                best_gain = gc;
            }
        }

        std::vector<char> marked(n, 0);
        for (std::size_t i : classes[best_c]) marked[i] = 1;
        auto drains = [&](std::size_t i) {
            for (const auto& [t, pt] : cfg.trans.support(tl[i]))
                if (!marked[p.idx(t + tb[i], tl[i])]) return false;
            return true;
        };
        std::size_t left = n - classes[best_c].size();
        while (left > 0) {
            bool grew = true;
            while (grew) {
                grew = false;
                for (std::size_t i = 0; i < n; ++i)
                    if (!marked[i] && drains(i)) {
                        marked[i] = 1;
                        --left;
                        grew = true;
                    }
            }
            if (left == 0) break;
            std::size_t fix = 0;
            while (marked[fix]) ++fix;
            auto [delta, d] = state_of(fix);
            bool first = true;
            detail::StageChoice best;
            int best_l = 1, best_b = 0;
            for (int l = 1; l <= cfg.B; ++l)
                for (int b = 0; l + b <= cfg.B; ++b) {
                    bool ok = true;
                    double lv = 0.0;
                    for (const auto& [t, pt] : cfg.trans.support(l)) {
                        std::size_t j = p.idx(t + b, l);
                        if (!marked[j]) {
                            ok = false;
                            break;
                        }
                        lv += pt * p.h[j];
                    }
                    if (!ok) continue;
                    auto c = detail::stage_choice(p, cfg, g, delta, d, l, lv);
                    if (first || c.cost < best.cost) {
                        first = false;
                        best = c;
                        best_l = l;
                        best_b = b;
                    }
                }
            bool stored_drains = true;
            for (const auto& [t, pt] : cfg.trans.support(p.l[fix]))
                if (!marked[p.idx(t + p.b[fix], p.l[fix])]) {
                    stored_drains = false;
                    break;
                }
            if (stored_drains) {
                double inc = detail::action_value(p, cfg, delta, d, p.Z[fix], p.l[fix], p.b[fix]);
                if (inc <= best.cost + detail::switch_tol(inc)) {
                    best_l = p.l[fix];
                    best_b = p.b[fix];
                    best.Z = p.Z[fix];
                }
            }
            tl[fix] = best_l;
            tb[fix] = best_b;
            tZ[fix] = static_cast<int>(best.Z);
            marked[fix] = 1;
            --left;
        }
    }

    int changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (p.l[i] != tl[i] || p.b[i] != tb[i] || p.Z[i] != tZ[i]) ++changed;
        p.l[i] = tl[i];
        p.b[i] = tb[i];
        p.Z[i] = tZ[i];
    }
    return changed;
}

/**
 * Policy iteration from the zero-wait (l=1, b=0) policy, alternating exact
 * evaluation and greedy improvement until the action maps repeat. Action
 * spaces are finite, so equality terminates; the cap guards malformed input.
 */
inline TvflPolicy solve_tvfl(const SourceConfig& cfg, const TvflOptions& opt = {}) {
    GammaTable g(cfg.table, cfg.trans, cfg.B);
    TvflPolicy p;
    p.B = cfg.B;
    p.delta_bound = cfg.delta_bound;
    const std::size_t n = static_cast<std::size_t>(cfg.delta_bound) * cfg.B;
    p.Z.assign(n, 0);
    p.l.assign(n, 1);
    p.b.assign(n, 0);
    for (int round = 0; round < opt.max_outer; ++round) {
        policy_evaluate(p, cfg);
        if (policy_improve(p, cfg, g) == 0) return p;
    }
    throw SolverError("solve_tvfl: no action-map convergence after " +
                      std::to_string(opt.max_outer) + " rounds");
}

/// Table lookup at a decision epoch; ages beyond the bound decide as the
/// saturated age.
inline Action tvfl_decide(const SystemState& s, const TvflPolicy& p) {
    return p.action_at(s.delta, s.d);
}

/// Max over states of |h - min_l stage cost| with the minimum evaluated in
/// the same decomposed form improvement uses.
inline double bellman_residual(const TvflPolicy& p, const SourceConfig& cfg, const GammaTable& g) {
    auto landings = detail::best_landings(p, cfg);
    double worst = 0.0;
    for (long long delta = 1; delta <= p.delta_bound; ++delta)
        for (int d = 1; d <= p.B; ++d) {
            double best = 0.0;
            for (int l = 1; l <= cfg.B; ++l) {
                double c = detail::stage_choice(p, cfg, g, delta, d, l, landings[l].value).cost;
                if (l == 1 || c < best) best = c;
            }
            worst = std::max(worst, std::abs(p.h_at(delta, d) - best));
        }
    return worst;
}

inline nlohmann::json to_json(const TvflPolicy& p) {
    auto matrix = [&](const auto& flat) {
        nlohmann::json rows = nlohmann::json::array();
        for (long long delta = 1; delta <= p.delta_bound; ++delta) {
            nlohmann::json row = nlohmann::json::array();
            for (int d = 1; d <= p.B; ++d) row.push_back(flat[(delta - 1) * p.B + (d - 1)]);
            rows.push_back(std::move(row));
        }
        return rows;
    };
    nlohmann::json j;
    j["p_bar"] = p.p_bar;
    j["h"] = matrix(p.h);
    j["Z"] = matrix(p.Z);
    j["l"] = matrix(p.l);
    j["b"] = matrix(p.b);
    j["B"] = p.B;
    j["delta_bound"] = p.delta_bound;
    return j;
}

inline TvflPolicy tvfl_from_json(const nlohmann::json& j) {
    TvflPolicy p;
    p.B = j.at("B").get<int>();
    p.delta_bound = j.at("delta_bound").get<int>();
    p.p_bar = j.at("p_bar").get<double>();
    const std::size_t n = static_cast<std::size_t>(p.delta_bound) * p.B;
    p.Z.reserve(n), p.l.reserve(n), p.b.reserve(n), p.h.reserve(n);
    auto flatten = [&](const char* key, auto& flat) {
        const auto& rows = j.at(key);
        if (rows.size() != static_cast<std::size_t>(p.delta_bound))
            throw std::invalid_argument(std::string("TvflPolicy json: bad row count for ") + key);
        for (const auto& row : rows) {
            if (row.size() != static_cast<std::size_t>(p.B))
                throw std::invalid_argument(std::string("TvflPolicy json: bad column count for ") + key);
            for (const auto& v : row) flat.push_back(v);
        }
    };
    flatten("Z", p.Z);
    flatten("l", p.l);
    flatten("b", p.b);
    flatten("h", p.h);
    return p;
}

}  // namespace aoi_coopt
