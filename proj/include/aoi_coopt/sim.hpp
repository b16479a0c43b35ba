#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoi_coopt/baselines.hpp"
#include "aoi_coopt/core.hpp"
#include "aoi_coopt/multi.hpp"
#include "aoi_coopt/tifl.hpp"
#include "aoi_coopt/tvfl.hpp"

namespace aoi_coopt {

/// splitmix64: state += 0x9E3779B97F4A7C15; mix with shift-xor-multiply.
/// Stated here verbatim so draws reproduce across implementations.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    /// 53-bit mantissa uniform in [0, 1)
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

/// Inverse-CDF draw over the finite support in ascending value order; always
/// consumes exactly one generator step, deterministic distributions included.
inline int draw_transmission(const TransmissionModel& m, int l, SplitMix64& rng) {
    double u = rng.uniform01();
    const auto& sup = m.support(l);
    double acc = 0.0;
    for (const auto& [t, p] : sup) {
        acc += p;
        if (u < acc) return t;
    }
    return sup.back().first;
}

struct SimEvent {
    long long send = 0;
    long long deliver = 0;
    int l = 1;
    int b = 0;  // position at send time; periodic's queue-aged offset may exceed B - l
};

struct SimOptions {
    double warmup_frac = 0.01;  // leading fraction of slots excluded from averages
    bool record_events = false;
    std::optional<SystemState> initial;  // default: age 1 + T(1) just after the first delivery
};

struct SimResult {
    long long horizon = 0;
    std::uint64_t seed = 0;
    double time_avg_error = 0.0;            // multi: sum over sources
    double normalized_error = 0.0;          // time_avg_error / M
    std::vector<double> per_source_avg;     // single source: one entry
    std::vector<long long> aoi_histogram;   // index = clamped age; sums to horizon per source
    double channel_utilization = 0.0;       // busy slots / horizon; multi: used / (N * horizon)
    std::vector<SimEvent> event_log;
};

namespace detail {

enum class SingleKind { tifl, tvfl, zero_wait, periodic };

struct SingleRun {
    SingleKind kind;
    const TiflPolicy* tifl = nullptr;
    const TvflPolicy* tvfl = nullptr;
    BaselineSpec base{};
};

inline SimResult run_single(const SingleRun& run, const SourceConfig& cfg, long long horizon,
                            std::uint64_t seed, const SimOptions& opt) {
    if (horizon < 1) throw std::invalid_argument("simulate_single: horizon must be >= 1");
    SplitMix64 rng(seed);
    const long long bound = cfg.delta_bound;

    SystemState s;
    if (opt.initial) {
        s = *opt.initial;
        s.delta = std::min(s.delta, bound);
    } else {
        s = {std::min<long long>(1 + draw_transmission(cfg.trans, 1, rng), bound), 1};
    }

    SimResult res;
    res.horizon = horizon;
    res.seed = seed;
    res.aoi_histogram.assign(bound + 1, 0);
    const long long skip = static_cast<long long>(opt.warmup_frac * static_cast<double>(horizon));

    bool inflight = false;
    long long deliver_at = 0;
    long long delivered_age = 0;
    int flight_l = 1;
    long long scheduled_send = 0;
    int pending_l = 1, pending_b = 0;  // the action triple is fixed at the decision epoch
    bool fresh_epoch = true;  // a delivery (or start) makes the next idle slot a decision epoch
    std::deque<long long> queue;
    double err_sum = 0.0;
    long long counted = 0, busy = 0;

    for (long long t = 0; t < horizon; ++t) {
        if (t > 0) {
            if (inflight && t == deliver_at) {
                s.delta = std::min(delivered_age, bound);
                s.d = flight_l;
                inflight = false;
                fresh_epoch = true;
            } else {
                s.delta = std::min(s.delta + 1, bound);
            }
        }
        if (run.kind == SingleKind::periodic && t % run.base.tp == 0) queue.push_back(t);

        res.aoi_histogram[s.delta] += 1;
        if (t >= skip) {
            err_sum += cfg.table.lookup(s.delta, s.d);
            ++counted;
        }

        if (!inflight) {
            bool send = false;
            int l = 1, b = 0;
            switch (run.kind) {
                case SingleKind::tifl:
                    if (tifl_decide(*run.tifl, s)) {
                        send = true;
                        l = run.tifl->l_star;
                        b = run.tifl->b_star;
                    }
                    break;
                case SingleKind::tvfl:
                    if (fresh_epoch) {
                        Action a = tvfl_decide(s, *run.tvfl);
                        scheduled_send = t + a.Z;
                        pending_l = a.l;
                        pending_b = a.b;
                        fresh_epoch = false;
                    }
                    if (t == scheduled_send) {
                        send = true;
                        l = pending_l;
                        b = pending_b;
                    }
                    break;
                case SingleKind::zero_wait:
                    send = true;
                    l = run.base.l;
                    break;
                case SingleKind::periodic:
                    if (!queue.empty()) {
                        long long g = queue.front();
                        queue.pop_front();
                        send = true;
                        l = run.base.l;
                        b = static_cast<int>(t - g);
                    }
                    break;
            }
            if (send) {
                int T = draw_transmission(cfg.trans, l, rng);
                inflight = true;
                deliver_at = t + T;
                delivered_age = static_cast<long long>(T) + b;
                flight_l = l;
                if (opt.record_events) res.event_log.push_back({t, deliver_at, l, b});
            }
        }
        if (inflight) ++busy;
    }

    res.time_avg_error = err_sum / static_cast<double>(counted);
    res.normalized_error = res.time_avg_error;
    res.per_source_avg = {res.time_avg_error};
    res.channel_utilization = static_cast<double>(busy) / static_cast<double>(horizon);
    return res;
}

}  // namespace detail

inline SimResult simulate_single(const TiflPolicy& p, const SourceConfig& cfg, long long horizon,
                                 std::uint64_t seed, const SimOptions& opt = {}) {
    detail::SingleRun r{detail::SingleKind::tifl, &p, nullptr, {}};
    return detail::run_single(r, cfg, horizon, seed, opt);
}

inline SimResult simulate_single(const TvflPolicy& p, const SourceConfig& cfg, long long horizon,
                                 std::uint64_t seed, const SimOptions& opt = {}) {
    detail::SingleRun r{detail::SingleKind::tvfl, nullptr, &p, {}};
    return detail::run_single(r, cfg, horizon, seed, opt);
}

inline SimResult simulate_single(const BaselineSpec& b, const SourceConfig& cfg, long long horizon,
                                 std::uint64_t seed, const SimOptions& opt = {}) {
    if (b.kind == BaselineSpec::Kind::maf)
        throw std::invalid_argument("simulate_single: maf is a multi-source policy");
    detail::SingleRun r{b.kind == BaselineSpec::Kind::zero_wait ? detail::SingleKind::zero_wait
                                                                : detail::SingleKind::periodic,
                        nullptr, nullptr, b};
    return detail::run_single(r, cfg, horizon, seed, opt);
}

/**
 * Time-average inference error over [from, to) reconstructed from an event
 * log alone: between consecutive deliveries the age grows linearly from the
 * delivered value (transmission time + send position) and the feature length
 * is the delivered one. Slots before the first delivery are undefined.
 * With from/to at delivery epochs this reproduces the simulator averages
 * without partial-cycle bias.
 */
inline double event_log_average(const std::vector<SimEvent>& log, const InferenceErrorTable& table,
                                long long from, long long to) {
    if (log.empty() || from < log.front().deliver || to <= from)
        throw std::invalid_argument("event_log_average: window must start at or after the first delivery");
    double sum = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        long long seg_begin = log[i].deliver;
        long long seg_end = i + 1 < log.size() ? log[i + 1].deliver : to;
        long long lo = std::max(seg_begin, from), hi = std::min(seg_end, to);
        if (lo >= hi) continue;
        long long age0 = (log[i].deliver - log[i].send) + log[i].b + (lo - seg_begin);
        sum += table.window_sum(age0, hi - lo, log[i].l);
    }
    return sum / static_cast<double>(to - from);
}

enum class MultiMode { net_gain, maf, relaxed };

/**
 * Shared-channel simulation: per-slot decisions, one-slot delivery, channel
 * budget asserted every slot except in relaxed mode (which evaluates the
 * decoupled bound policy). The multi-source dynamics are deterministic; the
 * seed is recorded for interface parity. aoi_histogram aggregates all
 * sources, so its counts sum to M * horizon.
 */
inline SimResult simulate_multi(const MultiConfig& cfg, MultiMode mode, const MultiPolicy* pol,
                                const BaselineSpec* maf, long long horizon, std::uint64_t seed,
                                const SimOptions& opt = {}) {
    if (horizon < 1) throw std::invalid_argument("simulate_multi: horizon must be >= 1");
    if ((mode == MultiMode::maf) != (maf != nullptr) || (mode != MultiMode::maf) != (pol != nullptr))
        throw std::invalid_argument("simulate_multi: mode/policy mismatch");
    const std::size_t M = cfg.sources.size();
    long long max_bound = 0;
    for (const auto& src : cfg.sources) max_bound = std::max<long long>(max_bound, src.delta_bound);

    SimResult res;
    res.horizon = horizon;
    res.seed = seed;
    res.aoi_histogram.assign(max_bound + 1, 0);
    res.per_source_avg.assign(M, 0.0);
    const long long skip = static_cast<long long>(opt.warmup_frac * static_cast<double>(horizon));

    std::vector<SystemState> states(M, SystemState{1, 1});
    std::vector<Action> acts(M);
    long long counted = 0, used_total = 0;

    for (long long t = 0; t < horizon; ++t) {
        for (std::size_t j = 0; j < M; ++j) {
            res.aoi_histogram[std::min<long long>(states[j].delta, max_bound)] += 1;
            if (t >= skip) res.per_source_avg[j] += cfg.sources[j].table.lookup(states[j].delta, states[j].d);
        }
        if (t >= skip) ++counted;

        switch (mode) {
            case MultiMode::net_gain:
                acts = net_gain_actions(cfg, *pol, states);
                break;
            case MultiMode::relaxed:
                for (std::size_t j = 0; j < M; ++j)
                    acts[j] = relaxed_action(pol->per_source[j], pol->lambda_star, states[j]);
                break;
            case MultiMode::maf: {
                for (auto& a : acts) a = {0, 0, 0};
                for (int j : maf_select(states, cfg.N, maf->l)) acts[j] = {0, maf->l, 0};
                break;
            }
        }
        long long used = 0;
        for (const auto& a : acts) used += a.l;
        if (mode != MultiMode::relaxed && used > cfg.N)
            throw std::logic_error("simulate_multi: channel budget exceeded at slot " +
                                   std::to_string(t));
        used_total += used;
        for (std::size_t j = 0; j < M; ++j) detail::advance_source(cfg.sources[j], states[j], acts[j]);
    }

    for (std::size_t j = 0; j < M; ++j) {
        res.per_source_avg[j] /= static_cast<double>(counted);
        res.time_avg_error += res.per_source_avg[j];
    }
    res.normalized_error = res.time_avg_error / static_cast<double>(M);
    res.channel_utilization =
        static_cast<double>(used_total) / (static_cast<double>(horizon) * cfg.N);
    return res;
}

inline constexpr const char* results_csv_header = "policy,param,horizon,seed,avg_error,normalized_error,utilization";

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

inline std::string result_row(const std::string& policy, const std::string& param,
                              const SimResult& r) {
    return csv_field(policy) + "," + csv_field(param) + "," + std::to_string(r.horizon) + "," +
           std::to_string(r.seed) + "," + detail::format_g17(r.time_avg_error) + "," +
           detail::format_g17(r.normalized_error) + "," +
           detail::format_g17(r.channel_utilization);
}

}  // namespace aoi_coopt
