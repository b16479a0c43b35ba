#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aoi_coopt/core.hpp"
#include "aoi_coopt/error_table.hpp"

namespace aoi_coopt {

namespace detail {

struct OracleAction {
    int Z, l, b;
    int next;       // decision-state index after delivery
    double cost;    // filled per deciding state
    double length;
};

}  // namespace detail

/**
 * Brute force over every stationary map from post-delivery states to
 * (Z <= z_max, l, b): transitions depend only on the action, so each map is a
 * functional graph whose long-run average is the mean of the cycle it walks
 * into; the minimum over maps and start states is the optimal gain of the
 * communicating decision-epoch chain. Deterministic transmission times only.
 * Throws if the enumeration would exceed 10^7 policies, and throws if the
 * wait cap binds (the optimum moves when the cap is raised, or is attained
 * only at Z = z_max), since a binding cap means the searched class is the
 * wrong comparison target.
 */
inline double exhaustive_single_source(const SourceConfig& cfg, int z_max = 4) {
    if (!cfg.trans.deterministic())
        throw std::invalid_argument("exhaustive_single_source: needs deterministic T");

    auto solve = [&cfg](int zmax, bool* cap_witness) -> double {
        // post-delivery states (T(l)+b, l), deduplicated
        std::vector<std::pair<long long, int>> states;
        auto state_index = [&states](long long delta, int d) {
            for (std::size_t i = 0; i < states.size(); ++i)
                if (states[i].first == delta && states[i].second == d) return static_cast<int>(i);
            states.emplace_back(delta, d);
            return static_cast<int>(states.size() - 1);
        };
        for (int l = 1; l <= cfg.B; ++l)
            for (int b = 0; l + b <= cfg.B; ++b)
                state_index(cfg.trans.support(l)[0].first + b, l);

        std::vector<detail::OracleAction> proto;
        for (int Z = 0; Z <= zmax; ++Z)
            for (int l = 1; l <= cfg.B; ++l)
                for (int b = 0; l + b <= cfg.B; ++b) {
                    int T = cfg.trans.support(l)[0].first;
                    proto.push_back({Z, l, b, state_index(T + b, l), 0.0, 0.0});
                }
        const std::size_t S = states.size(), A = proto.size();
        double policies = std::pow(static_cast<double>(A), static_cast<double>(S));
        if (policies > 1e7)
            throw std::invalid_argument("exhaustive_single_source: " + std::to_string(policies) +
                                        " policies exceeds the enumeration budget");

        // per (state, action): stage cost and length
        std::vector<std::vector<detail::OracleAction>> act(S, proto);
        for (std::size_t s = 0; s < S; ++s)
            for (auto& a : act[s]) {
                int T = cfg.trans.support(a.l)[0].first;
                a.cost = cfg.table.window_sum(states[s].first, a.Z + T, states[s].second);
                a.length = a.Z + T;
            }

        double best = 0.0;
        bool have_best = false, witness = false;
        std::vector<std::size_t> choice(S, 0);
        std::vector<int> seen(S);
        while (true) {
            for (std::size_t start = 0; start < S; ++start) {
                std::fill(seen.begin(), seen.end(), -1);
                int cur = static_cast<int>(start), step = 0;
                while (seen[cur] == -1) {
                    seen[cur] = step++;
                    cur = act[cur][choice[cur]].next;
                }
                double cost = 0.0, length = 0.0;
                bool at_cap = false;
                int node = cur;  // cycle entry
                do {
                    const auto& a = act[node][choice[node]];
                    cost += a.cost;
                    length += a.length;
                    at_cap = at_cap || a.Z == zmax;
                    node = a.next;
                } while (node != cur);
                double mean = cost / length;
                if (!have_best || mean < best - 1e-15) {
                    have_best = true;
                    best = mean;
                    witness = !at_cap;
                } else if (std::abs(mean - best) <= 1e-15) {
                    witness = witness || !at_cap;
                }
            }
            std::size_t pos = 0;
            while (pos < S && ++choice[pos] == A) choice[pos++] = 0;
            if (pos == S) break;
        }
        if (cap_witness) *cap_witness = witness;
        return best;
    };

    bool witness = false;
    double v = solve(z_max, &witness);
    double v_wide = solve(z_max + 2, nullptr);
    if (!witness || std::abs(v - v_wide) > 1e-12)
        throw std::runtime_error("exhaustive_single_source: wait cap Z <= " + std::to_string(z_max) +
                                 " binds on this instance");
    return v;
}

/**
 * Full enumeration of per-source length choices, same tie chain as the DP
 * (max value, then min total length, then lexicographically smallest).
 * Assignments are visited in lexicographic order, so keeping the first
 * strict improvement realizes the final tie rule.
 */
inline std::vector<int> exhaustive_knapsack(const std::vector<std::vector<double>>& gains, int N) {
    const std::size_t M = gains.size();
    double count = 1.0;
    for (const auto& g : gains) {
        if (g.empty() || g[0] != 0.0)
            throw std::invalid_argument("exhaustive_knapsack: gain vector must start with 0");
        count *= static_cast<double>(g.size());
    }
    if (count > 1e6)
        throw std::invalid_argument("exhaustive_knapsack: assignment space exceeds the budget");

    std::vector<int> cur(M, 0), best(M, 0);
    double best_value = 0.0;
    int best_len = 0;
    bool have = false;
    while (true) {
        int len = 0;
        double value = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            len += cur[j];
            value += gains[j][cur[j]];
        }
        if (len <= N && (!have || value > best_value || (value == best_value && len < best_len))) {
            have = true;
            best = cur;
            best_value = value;
            best_len = len;
        }
        std::size_t pos = M;
        while (pos > 0) {
            --pos;
            if (++cur[pos] < static_cast<int>(gains[pos].size())) break;
            cur[pos] = 0;
            if (pos == 0) return best;
        }
    }
}

/**
 * Finite joint distribution of a target Y (numeric alphabet) and the L most
 * recent per-slot observations V_0 (newest) .. V_{-L+1}, each over
 * {0..v_size-1}. pmf is laid out with y outermost and V_{-L+1} fastest:
 * index = ((y * v + v_0) * v + v_-1) * v ...
 */
struct DiscreteJoint {
    enum class Loss { quadratic, log };
    std::vector<double> y_values;
    int v_size = 2;
    int L = 1;
    Loss loss = Loss::quadratic;
    std::vector<double> pmf;

    DiscreteJoint(std::vector<double> y_values_, int v_size_, int L_, Loss loss_,
                  std::vector<double> pmf_)
        : y_values(std::move(y_values_)), v_size(v_size_), L(L_), loss(loss_), pmf(std::move(pmf_)) {
        if (y_values.empty() || v_size < 1 || L < 1)
            throw std::invalid_argument("DiscreteJoint: empty alphabet");
        std::size_t expect = y_values.size();
        for (int k = 0; k < L; ++k) expect *= static_cast<std::size_t>(v_size);
        if (pmf.size() != expect) throw std::invalid_argument("DiscreteJoint: pmf size mismatch");
        double sum = 0.0;
        for (double p : pmf) {
            if (!(p >= 0.0)) throw std::invalid_argument("DiscreteJoint: negative pmf entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("DiscreteJoint: pmf sums to " +
                                                                     std::to_string(sum));
    }
};

/**
 * Minimum expected loss of the Bayes action given the feature
 * (V_{-delta}, ..., V_{-delta-l+1}): conditional variance under quadratic
 * loss, Shannon conditional entropy in nats under log loss. l = 0 gives the
 * unconditional quantity. Requires delta + l within the modeled horizon.
 */
inline double l_conditional_entropy(const DiscreteJoint& j, int delta, int l) {
    if (delta < 0 || l < 0) throw std::invalid_argument("l_conditional_entropy: negative argument");
    if (delta + l > j.L)
        throw std::invalid_argument("l_conditional_entropy: delta + l exceeds the modeled horizon");
    const std::size_t ny = j.y_values.size();
    std::size_t nx = 1;
    for (int k = 0; k < l; ++k) nx *= static_cast<std::size_t>(j.v_size);

    // mass[x * ny + y] accumulated by marginalizing the unused slots
    std::vector<double> mass(nx * ny, 0.0);
    std::vector<int> v(j.L);
    for (std::size_t idx = 0; idx < j.pmf.size(); ++idx) {
        double p = j.pmf[idx];
        if (p == 0.0) continue;
        std::size_t rem = idx;
        for (int k = j.L - 1; k >= 0; --k) {
            v[k] = static_cast<int>(rem % j.v_size);
            rem /= j.v_size;
        }
        std::size_t y = rem;
        std::size_t x = 0;
        for (int k = delta + l - 1; k >= delta; --k) x = x * j.v_size + v[k];
        mass[x * ny + y] += p;
    }

    double total = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
        double px = 0.0;
        for (std::size_t y = 0; y < ny; ++y) px += mass[x * ny + y];
        if (px == 0.0) continue;
        if (j.loss == DiscreteJoint::Loss::quadratic) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t y = 0; y < ny; ++y) {
                m1 += mass[x * ny + y] * j.y_values[y];
                m2 += mass[x * ny + y] * j.y_values[y] * j.y_values[y];
            }
            double var = m2 - m1 * m1 / px;
            total += std::max(var, 0.0);
        } else {
            double hx = px * std::log(px);
            for (std::size_t y = 0; y < ny; ++y) {
                double q = mass[x * ny + y];
                if (q > 0.0) hx -= q * std::log(q);
            }
            total += hx;
        }
    }
    return total;
}

}  // namespace aoi_coopt
