// aoi-coopt: error-table generation, policy solving, simulation, parameter
// sweeps, and oracle verification for the feature-selection AoI system.
//
// Exit codes: 0 success, 1 verification failure, 2 usage error,
// 3 solver non-convergence.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "aoi_coopt/baselines.hpp"
#include "aoi_coopt/core.hpp"
#include "aoi_coopt/error_table.hpp"
#include "aoi_coopt/gamma.hpp"
#include "aoi_coopt/jakes.hpp"
#include "aoi_coopt/multi.hpp"
#include "aoi_coopt/oracle.hpp"
#include "aoi_coopt/sim.hpp"
#include "aoi_coopt/tifl.hpp"
#include "aoi_coopt/tvfl.hpp"

namespace {

using namespace aoi_coopt;

// ----------------------------------------------------------------------------
// plumbing

/// "-" streams to stdout; otherwise a file. Both receive identical bytes.
class OutStream {
  public:
    explicit OutStream(const std::string& path) {
        if (path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw std::runtime_error("cannot open output path: " + path);
        }
    }
    std::ostream& get() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const char* env = std::getenv("AOI_COOPT_THREADS");
    if (!env) return hw;
    int v = std::atoi(env);
    return v >= 1 ? static_cast<unsigned>(v) : 1u;
}

/// Run one job per index on the worker pool; exceptions are kept per index
/// and the first (in index order) is rethrown after all workers finish.
template <typename Fn>
void run_indexed(std::size_t count, Fn&& fn) {
    unsigned workers = std::min<std::size_t>(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Split a --policies list on commas, re-attaching fragments that do not
/// start a new policy name (so periodic:tp=4,l=1 survives as one token).
std::vector<std::string> split_policies(const std::string& text) {
    static const char* heads[] = {"tifl", "tvfl", "zero-wait", "periodic", "maf",
                                  "netgain", "lowerbound"};
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        bool fresh = false;
        for (const char* h : heads)
            if (item == h || item.rfind(std::string(h) + ":", 0) == 0) fresh = true;
        if (fresh || out.empty())
            out.push_back(item);
        else
            out.back() += "," + item;
    }
    if (out.empty()) throw std::invalid_argument("empty --policies list");
    return out;
}

bool monotone_in_l(const InferenceErrorTable& t) {
    for (long long delta = 0; delta <= t.delta_bound(); ++delta)
        for (int l = 1; l < t.B(); ++l)
            if (t.lookup(delta, l + 1) > t.lookup(delta, l) + 1e-12) return false;
    return true;
}

void table_summary(const InferenceErrorTable& t) {
    std::cerr << "table B=" << t.B() << " delta_bound=" << t.delta_bound()
              << " min=" << detail::format_g17(t.min_value())
              << " max=" << detail::format_g17(t.max_value())
              << " monotone_in_l=" << (monotone_in_l(t) ? "yes" : "no") << "\n";
}

SourceConfig make_config(const std::string& table_path, const std::string& trans_spec, int B,
                         int delta_bound) {
    InferenceErrorTable table = load_csv(table_path);
    if (B <= 0) B = table.B();
    if (delta_bound <= 0) delta_bound = static_cast<int>(table.delta_bound());
    TransmissionModel trans = TransmissionModel::parse(trans_spec, B);
    return SourceConfig(table, trans, B, delta_bound);
}

// ----------------------------------------------------------------------------
// errgen

struct ErrgenArgs {
    std::string out = "-";
    int B = 0;
    int delta_bound = 0;
    double b = 1.0, v = 0.0, fc = 0.0, ts = 1e-3, sigma2 = 1e-6, fd = -1.0;
    double c = 0.0, slope = 1.0;
};

int run_errgen_jakes(const ErrgenArgs& a) {
    JakesParams p;
    if (a.fd >= 0.0) {
        p = JakesParams{a.b, a.fd, a.ts, a.sigma2};
    } else {
        if (a.v <= 0.0 || a.fc <= 0.0)
            throw std::invalid_argument("errgen jakes: need --fd, or --v and --fc");
        p = JakesParams::from_speed(a.b, a.v, a.fc, a.ts, a.sigma2);
    }
    InferenceErrorTable t = jakes_error_table(p, a.B, a.delta_bound);
    OutStream out(a.out);
    save_csv(t, out.get());
    table_summary(t);
    return 0;
}

int run_errgen_synthetic(const ErrgenArgs& a, bool constant) {
    InferenceErrorTable t = constant ? InferenceErrorTable::constant(a.c, a.B, a.delta_bound)
                                     : InferenceErrorTable::linear(a.slope, a.B, a.delta_bound);
    OutStream out(a.out);
    save_csv(t, out.get());
    table_summary(t);
    return 0;
}

// ----------------------------------------------------------------------------
// solve

struct SolveArgs {
    std::string table, trans, config, out = "-";
    int B = 0, delta_bound = 0;
};

void write_json(const nlohmann::json& j, const std::string& path) {
    OutStream out(path);
    out.get() << j.dump(2) << "\n";
}

int run_solve(const std::string& kind, const SolveArgs& a) {
    if (kind == "tifl" || kind == "tvfl") {
        if (a.table.empty() || a.trans.empty())
            throw std::invalid_argument("solve " + kind + ": --table and --trans are required");
        SourceConfig cfg = make_config(a.table, a.trans, a.B, a.delta_bound);
        if (kind == "tifl") {
            TiflPolicy p = solve_tifl(cfg);
            nlohmann::json j = to_json(p);
            j["kind"] = "tifl";
            write_json(j, a.out);
            std::cerr << "beta_star=" << detail::format_g17(p.beta_star) << " l_star=" << p.l_star
                      << " b_star=" << p.b_star << "\n";
        } else {
            TvflPolicy p = solve_tvfl(cfg);
            nlohmann::json j = to_json(p);
            j["kind"] = "tvfl";
            write_json(j, a.out);
            std::cerr << "p_bar=" << detail::format_g17(p.p_bar) << "\n";
        }
        return 0;
    }
    if (kind == "multi") {
        if (a.config.empty()) throw std::invalid_argument("solve multi: --config is required");
        std::ifstream in(a.config);
        if (!in) throw std::runtime_error("cannot read " + a.config);
        nlohmann::json cj = nlohmann::json::parse(in);
        MultiConfig cfg = load_multi_config(cj, std::filesystem::path(a.config).parent_path());
        DualResult res = dual_ascent(cfg);
        nlohmann::json j = to_json(res.policy);
        j["kind"] = "multi";
        write_json(j, a.out);
        double pbar_sum = 0.0;
        for (const auto& t : res.policy.per_source) pbar_sum += t.p_bar;
        std::cerr << "lambda_star=" << detail::format_g17(res.policy.lambda_star)
                  << " iters=" << res.iters << " sum_p_bar=" << detail::format_g17(pbar_sum)
                  << "\n";
        return 0;
    }
    throw std::invalid_argument("solve: unknown kind " + kind);
}

// ----------------------------------------------------------------------------
// simulate

struct SimArgs {
    std::string table, trans, config, policy, artifact, out = "-";
    long long horizon = 1000000;
    std::uint64_t seed = 1;
    double warmup = 0.01;
};

SimResult simulate_single_dispatch(const SimArgs& a, const SourceConfig& cfg, std::string& name) {
    SimOptions opt;
    opt.warmup_frac = a.warmup;
    if (std::filesystem::exists(a.policy)) {
        std::ifstream in(a.policy);
        nlohmann::json j = nlohmann::json::parse(in);
        std::string kind = j.value("kind", j.contains("beta_star") ? "tifl" : "tvfl");
        if (kind == "tifl") {
            TiflPolicy p = tifl_from_json(j);
            SourceConfig pc(cfg.table, cfg.trans, p.B, p.delta_bound);
            p.gamma = std::make_shared<GammaTable>(pc.table, pc.trans, pc.B);
            name = "tifl";
            return simulate_single(p, pc, a.horizon, a.seed, opt);
        }
        if (kind == "tvfl") {
            TvflPolicy p = tvfl_from_json(j);
            SourceConfig pc(cfg.table, cfg.trans, p.B, p.delta_bound);
            name = "tvfl";
            return simulate_single(p, pc, a.horizon, a.seed, opt);
        }
        throw std::invalid_argument("simulate: artifact kind '" + kind + "' is not single-source");
    }
    BaselineSpec b = BaselineSpec::parse(a.policy, cfg.B);
    name = b.str();
    return simulate_single(b, cfg, a.horizon, a.seed, opt);
}

int run_simulate(const SimArgs& a) {
    if (a.table.empty() == a.config.empty())
        throw std::invalid_argument("simulate: exactly one of --table (single-source) or --config (multi-source) is required");
    SimOptions opt;
    opt.warmup_frac = a.warmup;
    std::string name;
    SimResult res;
    if (!a.table.empty()) {
        SourceConfig cfg = make_config(a.table, a.trans, 0, 0);
        res = simulate_single_dispatch(a, cfg, name);
    } else {
        std::ifstream in(a.config);
        if (!in) throw std::runtime_error("cannot read " + a.config);
        MultiConfig cfg = load_multi_config(nlohmann::json::parse(in),
                                            std::filesystem::path(a.config).parent_path());
        if (a.policy == "netgain" || a.policy == "lowerbound") {
            if (a.artifact.empty())
                throw std::invalid_argument("simulate: --artifact (solve multi output) required for " +
                                            a.policy);
            std::ifstream pin(a.artifact);
            if (!pin) throw std::runtime_error("cannot read " + a.artifact);
            MultiPolicy pol = multi_from_json(nlohmann::json::parse(pin));
            name = a.policy;
            res = simulate_multi(cfg,
                                 a.policy == "netgain" ? MultiMode::net_gain : MultiMode::relaxed,
                                 &pol, nullptr, a.horizon, a.seed, opt);
        } else {
            int min_B = cfg.sources.front().B;
            for (const auto& s : cfg.sources) min_B = std::min(min_B, s.B);
            BaselineSpec b = BaselineSpec::parse(a.policy, min_B);
            if (b.kind != BaselineSpec::Kind::maf)
                throw std::invalid_argument("simulate: multi-source baselines are maf:l=...");
            name = b.str();
            res = simulate_multi(cfg, MultiMode::maf, nullptr, &b, a.horizon, a.seed, opt);
        }
    }
    OutStream out(a.out);
    out.get() << results_csv_header << "\n" << result_row(name, "-", res) << "\n";
    return 0;
}

// ----------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string kind;
    std::string table, config, policies, out = "-";
    double from = 0.0, to = 0.0, alpha = 0.2;
    int steps = 0;
    long long horizon = 1000000;
    std::uint64_t seed = 1;
    double warmup = 0.01;
};

std::vector<std::string> single_point_rows(const SweepArgs& a, const InferenceErrorTable& table,
                                           const std::vector<std::string>& policies, double alpha,
                                           int B, const std::string& param) {
    InferenceErrorTable t = table.truncated(B, table.delta_bound());
    TransmissionModel trans = TransmissionModel::det(alpha, B);
    SourceConfig cfg(t, trans, B, static_cast<int>(table.delta_bound()));
    SimOptions opt;
    opt.warmup_frac = a.warmup;
    std::vector<std::string> rows;
    for (const auto& pol : policies) {
        SimResult res;
        if (pol == "tifl") {
            res = simulate_single(solve_tifl(cfg), cfg, a.horizon, a.seed, opt);
        } else if (pol == "tvfl") {
            res = simulate_single(solve_tvfl(cfg), cfg, a.horizon, a.seed, opt);
        } else {
            res = simulate_single(BaselineSpec::parse(pol, B), cfg, a.horizon, a.seed, opt);
        }
        rows.push_back(result_row(pol, param, res));
    }
    return rows;
}

std::vector<std::string> multi_point_rows(const SweepArgs& a, const MultiConfig& cfg,
                                          const std::vector<std::string>& policies,
                                          const std::string& param) {
    SimOptions opt;
    opt.warmup_frac = a.warmup;
    bool need_dual = false;
    for (const auto& pol : policies)
        if (pol == "netgain" || pol == "lowerbound") need_dual = true;
    MultiPolicy mp;
    if (need_dual) mp = dual_ascent(cfg).policy;
    int min_B = cfg.sources.front().B;
    for (const auto& s : cfg.sources) min_B = std::min(min_B, s.B);
    std::vector<std::string> rows;
    for (const auto& pol : policies) {
        SimResult res;
        if (pol == "netgain") {
            res = simulate_multi(cfg, MultiMode::net_gain, &mp, nullptr, a.horizon, a.seed, opt);
        } else if (pol == "lowerbound") {
            res = simulate_multi(cfg, MultiMode::relaxed, &mp, nullptr, a.horizon, a.seed, opt);
        } else {
            BaselineSpec b = BaselineSpec::parse(pol, min_B);
            if (b.kind != BaselineSpec::Kind::maf)
                throw std::invalid_argument("sweep: multi-source baselines are maf:l=...");
            res = simulate_multi(cfg, MultiMode::maf, nullptr, &b, a.horizon, a.seed, opt);
        }
        rows.push_back(result_row(pol, param, res));
    }
    return rows;
}

int run_sweep(const SweepArgs& a) {
    auto policies = split_policies(a.policies);
    std::vector<std::vector<std::string>> point_rows;

    if (a.kind == "alpha" || a.kind == "buffer") {
        if (a.table.empty()) throw std::invalid_argument("sweep " + a.kind + ": --table required");
        InferenceErrorTable table = load_csv(a.table);
        if (a.kind == "alpha") {
            int steps = a.steps > 0 ? a.steps : 10;
            point_rows.resize(steps);
            run_indexed(steps, [&](std::size_t i) {
                double x = steps == 1
                               ? a.from
                               : a.from + (a.to - a.from) * static_cast<double>(i) / (steps - 1);
                point_rows[i] = single_point_rows(a, table, policies, x, table.B(),
                                                 "alpha=" + detail::format_g17(x));
            });
        } else {
            int lo = static_cast<int>(a.from), hi = static_cast<int>(a.to);
            if (lo < 1 || hi < lo || hi > table.B())
                throw std::invalid_argument("sweep buffer: need 1 <= from <= to <= table B");
            if (a.steps > 0 && a.steps != hi - lo + 1)
                throw std::invalid_argument("sweep buffer: --steps must match the integer range");
            point_rows.resize(hi - lo + 1);
            run_indexed(point_rows.size(), [&](std::size_t i) {
                int B = lo + static_cast<int>(i);
                point_rows[i] = single_point_rows(a, table, policies, a.alpha, B,
                                                 "B=" + std::to_string(B));
            });
        }
    } else if (a.kind == "sources" || a.kind == "scale") {
        if (a.config.empty()) throw std::invalid_argument("sweep " + a.kind + ": --config required");
        std::ifstream in(a.config);
        if (!in) throw std::runtime_error("cannot read " + a.config);
        MultiConfig base = load_multi_config(nlohmann::json::parse(in),
                                             std::filesystem::path(a.config).parent_path());
        int lo = static_cast<int>(a.from), hi = static_cast<int>(a.to);
        if (lo < 1 || hi < lo) throw std::invalid_argument("sweep " + a.kind + ": need 1 <= from <= to");
        if (a.steps > 0 && a.steps != hi - lo + 1)
            throw std::invalid_argument("sweep " + a.kind + ": --steps must match the integer range");
        point_rows.resize(hi - lo + 1);
        run_indexed(point_rows.size(), [&](std::size_t i) {
            int x = lo + static_cast<int>(i);
            if (a.kind == "sources") {
                std::vector<MultiSource> sources;
                for (int j = 0; j < x; ++j) sources.push_back(base.sources[j % base.sources.size()]);
                MultiConfig cfg(base.N, std::move(sources), base.dual);
                point_rows[i] = multi_point_rows(a, cfg, policies, "M=" + std::to_string(x));
            } else {
                std::vector<MultiSource> sources;
                for (int r = 0; r < x; ++r)
                    for (const auto& s : base.sources) sources.push_back(s);
                DualParams dual = base.dual;
                dual.beta = base.dual.beta / x;
                MultiConfig cfg(base.N * x, std::move(sources), dual);
                point_rows[i] = multi_point_rows(a, cfg, policies, "r=" + std::to_string(x));
            }
        });
    } else {
        throw std::invalid_argument("sweep: kind must be alpha|buffer|sources|scale");
    }

    OutStream out(a.out);
    out.get() << results_csv_header << "\n";
    for (const auto& rows : point_rows)
        for (const auto& r : rows) out.get() << r << "\n";
    return 0;
}

// ----------------------------------------------------------------------------
// verify

InferenceErrorTable random_small_table(SplitMix64& rng, int B, int delta_bound) {
    std::vector<std::vector<double>> rows(delta_bound + 1, std::vector<double>(B));
    bool monotone = rng.next() % 2 == 0;
    for (int l = 0; l < B; ++l) {
        double v = 0.2 + rng.uniform01();
        for (int delta = 0; delta <= delta_bound; ++delta) {
            if (monotone) {
                v += rng.uniform01();
                rows[delta][l] = v;
            } else {
                rows[delta][l] = 0.2 + 3.0 * rng.uniform01();
            }
        }
    }
    return InferenceErrorTable::custom(rows);
}

int run_verify(bool entropy_only, int trials, std::uint64_t seed) {
    bool ok = true;
    SplitMix64 rng(seed);

    if (!entropy_only) {
        // solver against the exhaustive policy enumeration
        int done = 0, skipped = 0;
        double worst = 0.0;
        while (done < 20 && skipped < 200) {
            int B = 1 + static_cast<int>(rng.next() % 2);
            int bound = 6 + static_cast<int>(rng.next() % 3);
            int T1 = 1 + static_cast<int>(rng.next() % 2);
            InferenceErrorTable t = random_small_table(rng, B, bound);
            std::map<int, TransmissionModel::Support> sup;
            for (int l = 1; l <= B; ++l)
                sup[l] = {{T1 + (l - 1), 1.0}};
            SourceConfig cfg(t, TransmissionModel::from_table(sup, B), B, bound);
            double reference;
            try {
                reference = exhaustive_single_source(cfg);
            } catch (const std::runtime_error&) {
                ++skipped;  // wait cap binds on this draw
                continue;
            }
            double got = solve_tvfl(cfg).p_bar;
            worst = std::max(worst, std::abs(got - reference) / reference);
            ++done;
        }
        bool pass = done == 20 && worst <= 1e-6;
        ok = ok && pass;
        std::cout << (pass ? "[PASS]" : "[FAIL]") << " solver-vs-exhaustive: " << done
                  << " instances, max rel diff " << worst << " (skipped " << skipped << ")\n";

        // knapsack DP against enumeration
        int agree = 0;
        const int kn_trials = 200;
        for (int i = 0; i < kn_trials; ++i) {
            int M = 1 + static_cast<int>(rng.next() % 4);
            int N = static_cast<int>(rng.next() % 7);
            std::vector<std::vector<double>> gains(M);
            for (auto& g : gains) {
                g.resize(1 + 1 + rng.next() % 4, 0.0);
                for (std::size_t l = 1; l < g.size(); ++l)
                    g[l] = static_cast<double>(static_cast<long long>(rng.next() % 33) - 16) / 16.0;
            }
            if (knapsack_select(gains, N) == exhaustive_knapsack(gains, N)) ++agree;
        }
        bool kpass = agree == kn_trials;
        ok = ok && kpass;
        std::cout << (kpass ? "[PASS]" : "[FAIL]") << " knapsack-vs-exhaustive: " << agree << "/"
                  << kn_trials << " agree\n";
    }

    // conditional-loss monotonicity in the feature length
    double worst_gap = -1.0;
    int checked = 0;
    for (int i = 0; i < trials; ++i) {
        int v = 2 + static_cast<int>(rng.next() % 2);
        int L = 2 + static_cast<int>(rng.next() % 2);
        int ny = 2 + static_cast<int>(rng.next() % 3);
        std::vector<double> yv(ny);
        for (auto& y : yv) y = -1.0 + 2.0 * rng.uniform01();
        std::size_t n = ny;
        for (int k = 0; k < L; ++k) n *= v;
        std::vector<double> pmf(n);
        double sum = 0.0;
        for (auto& p : pmf) {
            p = rng.uniform01();
            sum += p;
        }
        for (auto& p : pmf) p /= sum;
        for (auto loss : {DiscreteJoint::Loss::quadratic, DiscreteJoint::Loss::log}) {
            DiscreteJoint joint(yv, v, L, loss, pmf);
            for (int delta = 0; delta + 1 <= L; ++delta)
                for (int l = 1; delta + l + 1 <= L; ++l) {
                    double gap = l_conditional_entropy(joint, delta, l + 1) -
                                 l_conditional_entropy(joint, delta, l);
                    worst_gap = std::max(worst_gap, gap);
                    ++checked;
                }
        }
    }
    bool epass = worst_gap <= 1e-12;
    ok = ok && epass;
    std::cout << (epass ? "[PASS]" : "[FAIL]") << " loss-monotone-in-l: " << checked
              << " comparisons, max increase " << worst_gap << "\n";

    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature-selection AoI toolkit"};
    app.require_subcommand(1);

    ErrgenArgs eg;
    auto* errgen = app.add_subcommand("errgen", "generate an inference error table CSV");
    errgen->require_subcommand(1);
    auto* eg_jakes = errgen->add_subcommand("jakes", "analytic fading-channel MMSE table");
    eg_jakes->add_option("--b", eg.b, "prior variance");
    eg_jakes->add_option("--v", eg.v, "velocity m/s");
    eg_jakes->add_option("--fc", eg.fc, "carrier frequency Hz");
    eg_jakes->add_option("--ts", eg.ts, "slot duration s");
    eg_jakes->add_option("--sigma2", eg.sigma2, "feature noise variance");
    eg_jakes->add_option("--fd", eg.fd, "Doppler frequency Hz (overrides --v/--fc)");
    eg_jakes->add_option("--B", eg.B, "buffer size")->required();
    eg_jakes->add_option("--delta-bound", eg.delta_bound, "AoI truncation")->required();
    eg_jakes->add_option("--out", eg.out, "output path or -");
    auto* eg_const = errgen->add_subcommand("constant", "constant table");
    eg_const->add_option("--c", eg.c, "value")->required();
    eg_const->add_option("--B", eg.B)->required();
    eg_const->add_option("--delta-bound", eg.delta_bound)->required();
    eg_const->add_option("--out", eg.out);
    auto* eg_lin = errgen->add_subcommand("linear", "err = slope * age, length-independent");
    eg_lin->add_option("--slope", eg.slope)->required();
    eg_lin->add_option("--B", eg.B)->required();
    eg_lin->add_option("--delta-bound", eg.delta_bound)->required();
    eg_lin->add_option("--out", eg.out);

    SolveArgs sa;
    std::string solve_kind;
    auto* solve = app.add_subcommand("solve", "solve a policy and write its JSON artifact");
    solve->add_option("kind", solve_kind, "tifl|tvfl|multi")->required();
    solve->add_option("--table", sa.table, "error table CSV");
    solve->add_option("--trans", sa.trans, "det:alpha=... or table:{...}");
    solve->add_option("--config", sa.config, "multi-source JSON config");
    solve->add_option("--B", sa.B, "truncate to buffer size");
    solve->add_option("--delta-bound", sa.delta_bound, "truncate AoI domain");
    solve->add_option("--out", sa.out, "artifact path or -");

    SimArgs sim;
    auto* simulate = app.add_subcommand("simulate", "run one simulation, emit a results CSV");
    simulate->add_option("--table", sim.table);
    simulate->add_option("--trans", sim.trans);
    simulate->add_option("--config", sim.config);
    simulate->add_option("--policy", sim.policy,
                         "artifact path, baseline spec, or netgain|lowerbound|maf:l=...")
        ->required();
    simulate->add_option("--artifact", sim.artifact, "solve multi output for netgain/lowerbound");
    simulate->add_option("--horizon", sim.horizon);
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--warmup", sim.warmup, "warm-up fraction discarded from averages");
    simulate->add_option("--out", sim.out);

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "solve+simulate across a parameter range");
    sweep->add_option("kind", sw.kind, "alpha|buffer|sources|scale")->required();
    sweep->add_option("--table", sw.table);
    sweep->add_option("--config", sw.config);
    sweep->add_option("--from", sw.from)->required();
    sweep->add_option("--to", sw.to)->required();
    sweep->add_option("--steps", sw.steps);
    sweep->add_option("--alpha", sw.alpha, "transmission slope for buffer sweeps");
    sweep->add_option("--policies", sw.policies, "comma-separated policy list")->required();
    sweep->add_option("--horizon", sw.horizon);
    sweep->add_option("--seed", sw.seed);
    sweep->add_option("--warmup", sw.warmup);
    sweep->add_option("--out", sw.out);

    bool verify_entropy = false;
    int verify_trials = 50;
    std::uint64_t verify_seed = 12345;
    auto* verify = app.add_subcommand("verify", "run oracle cross-checks");
    verify->add_flag("--entropy", verify_entropy, "run only the conditional-loss checks");
    verify->add_option("--trials", verify_trials, "random joints for the entropy checks");
    verify->add_option("--seed", verify_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (eg_jakes->parsed()) return run_errgen_jakes(eg);
        if (eg_const->parsed()) return run_errgen_synthetic(eg, true);
        if (eg_lin->parsed()) return run_errgen_synthetic(eg, false);
        if (solve->parsed()) return run_solve(solve_kind, sa);
        if (simulate->parsed()) return run_simulate(sim);
        if (sweep->parsed()) return run_sweep(sw);
        if (verify->parsed()) return run_verify(verify_entropy, verify_trials, verify_seed);
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
