#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "aoi_coopt/error_table.hpp"

namespace aoi_coopt {

/// Thrown on iterative-solver non-convergence and root-bracket failures;
/// distinct from argument errors so the CLI can map it to its own exit code.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// (AoI, last delivered feature length). delta >= 1 at every decision epoch;
/// the minimum delivered age is T+b >= 1 single-source, 1+b multi-source.
struct SystemState {
    long long delta = 1;
    int d = 1;
};

/// Wait Z slots (single-source only), then send a feature of length l whose
/// freshest sample is b slots old at send time.
struct Action {
    int Z = 0;
    int l = 1;
    int b = 0;
};

enum class Mode { single, multi };

/// ok (empty) or a description of the violated bound. Never throws.
inline std::optional<std::string> validate_action(const Action& a, int B, Mode mode) {
    if (a.Z < 0) return "wait must be >= 0";
    if (a.b < 0) return "position must be >= 0";
    if (mode == Mode::single) {
        if (a.l < 1) return "single-source requires l >= 1";
        if (a.l > B) return "l exceeds buffer size " + std::to_string(B);
        if (a.l + a.b > B)
            return "l+b=" + std::to_string(a.l + a.b) + " > " + std::to_string(B);
    } else {
        if (a.l < 0) return "l must be >= 0";
        if (a.l + a.b > B)
            return "l+b=" + std::to_string(a.l + a.b) + " > " + std::to_string(B);
    }
    return std::nullopt;
}

/// Age of the delivered feature at its delivery slot: T+b after a T-slot
/// transmission (single-source), 1+b under one-slot delivery (multi-source).
inline long long aoi_after_delivery(long long T, int b, Mode mode = Mode::single) {
    if (b < 0) throw std::invalid_argument("aoi_after_delivery: b < 0");
    if (mode == Mode::multi) return 1 + b;
    if (T < 1) throw std::invalid_argument("aoi_after_delivery: T < 1");
    return T + b;
}

/// No delivery this slot: age grows by one, d unchanged. Saturation is a
/// table-lookup concern, not a state concern.
inline SystemState aoi_step(SystemState s) {
    ++s.delta;
    return s;
}

/**
 * Per-length discrete transmission-time distribution T(l) over support
 * {1..T_max(l)}. Finite support keeps every solver expectation an exact sum.
 *
 * Text form: `det:alpha=<float>` or `table:` followed by JSON
 * `{"1":[[1,0.5],[3,0.5]], ...}` mapping length to [support, prob] pairs.
 */
class TransmissionModel {
public:
    using Support = std::vector<std::pair<int, double>>;  // (t, prob), t ascending

    /// Deterministic T(l) = ceil(alpha*l), floored at one slot.
    static TransmissionModel det(double alpha, int B) {
        if (!(alpha >= 0) || !std::isfinite(alpha))
            throw std::invalid_argument("det transmission model: alpha must be >= 0");
        TransmissionModel m;
        m.text_ = "det:alpha=" + detail::format_g17(alpha);
        for (int l = 1; l <= B; ++l) {
            int t = static_cast<int>(std::ceil(alpha * l));
            m.support_.push_back({{std::max(1, t), 1.0}});
        }
        m.finish();
        return m;
    }

    /// table[l] lists (t, p); every l in 1..B must be present.
    static TransmissionModel from_table(const std::map<int, Support>& table, int B) {
        TransmissionModel m;
        for (int l = 1; l <= B; ++l) {
            auto it = table.find(l);
            if (it == table.end())
                throw std::invalid_argument("transmission table: missing length " +
                                            std::to_string(l));
            Support s = it->second;
            if (s.empty())
                throw std::invalid_argument("transmission table: empty support for l=" +
                                            std::to_string(l));
            double total = 0.0;
            int prev = 0;
            for (auto& [t, p] : s) {
                if (t < 1)
                    throw std::invalid_argument("transmission table: support point < 1 for l=" +
                                                std::to_string(l));
                if (t <= prev)
                    throw std::invalid_argument(
                        "transmission table: support must be strictly ascending for l=" +
                        std::to_string(l));
                if (!(p > 0) || !std::isfinite(p))
                    throw std::invalid_argument("transmission table: probabilities must be > 0");
                prev = t;
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw std::invalid_argument("transmission table: probabilities for l=" +
                                            std::to_string(l) + " sum to " +
                                            std::to_string(total) + ", not 1");
            m.support_.push_back(std::move(s));
        }
        {
            nlohmann::json j = nlohmann::json::object();
            for (int l = 1; l <= B; ++l) {
                nlohmann::json rows = nlohmann::json::array();
                for (auto& [t, p] : m.support_[l - 1]) rows.push_back({t, p});
                j[std::to_string(l)] = rows;
            }
            m.text_ = "table:" + j.dump();
        }
        m.finish();
        return m;
    }

    /// Parses the text form documented above.
    static TransmissionModel parse(const std::string& text, int B) {
        if (text.rfind("det:alpha=", 0) == 0) {
            char* end = nullptr;
            const char* s = text.c_str() + 10;
            double alpha = std::strtod(s, &end);
            if (end == s || *end != '\0')
                throw std::invalid_argument("transmission spec: bad alpha in '" + text + "'");
            return det(alpha, B);
        }
        if (text.rfind("table:", 0) == 0) {
            nlohmann::json j = nlohmann::json::parse(text.substr(6));
            std::map<int, Support> table;
            for (auto& [key, rows] : j.items()) {
                int l = std::stoi(key);
                Support s;
                for (auto& row : rows)
                    s.push_back({row.at(0).get<int>(), row.at(1).get<double>()});
                table[l] = std::move(s);
            }
            return from_table(table, B);
        }
        throw std::invalid_argument("transmission spec must start with 'det:alpha=' or 'table:', got '" +
                                    text + "'");
    }

    int B() const { return static_cast<int>(support_.size()); }

    const Support& support(int l) const {
        check(l);
        return support_[l - 1];
    }

    double mean(int l) const {
        check(l);
        return mean_[l - 1];
    }

    /// Largest support point across lengths 1..upto (default: all).
    int max_delay(int upto = -1) const {
        if (upto < 0) upto = B();
        check(upto);
        int m = 0;
        for (int l = 1; l <= upto; ++l) m = std::max(m, support_[l - 1].back().first);
        return m;
    }

    bool deterministic() const {
        for (auto& s : support_)
            if (s.size() != 1) return false;
        return true;
    }

    const std::string& text() const { return text_; }

private:
    void check(int l) const {
        if (l < 1 || l > B())
            throw std::out_of_range("transmission model: length " + std::to_string(l) +
                                    " outside 1.." + std::to_string(B()));
    }
    void finish() {
        mean_.clear();
        for (auto& s : support_) {
            double m = 0.0;
            for (auto& [t, p] : s) m += t * p;
            mean_.push_back(m);
        }
    }

    std::vector<Support> support_;
    std::vector<double> mean_;
    std::string text_;
};

inline double transmission_mean(const TransmissionModel& m, int l) { return m.mean(l); }

/**
 * One source as the solvers see it: error table truncated to the working
 * (delta_bound, B) window plus the transmission model. delta_bound must cover
 * every reachable delivered age (B + max support) so no state below the
 * saturation row is unrepresented.
 */
struct SourceConfig {
    InferenceErrorTable table;
    TransmissionModel trans;
    int B;
    int delta_bound;

    SourceConfig(const InferenceErrorTable& full_table, TransmissionModel tm, int B_,
                 int delta_bound_)
        : table(full_table.truncated(B_, delta_bound_)),
          trans(std::move(tm)),
          B(B_),
          delta_bound(delta_bound_) {
        if (trans.B() < B)
            throw std::invalid_argument("source config: transmission model covers fewer lengths than B");
        if (delta_bound < B + trans.max_delay(B))
            throw std::invalid_argument(
                "source config: delta_bound must be >= B + max transmission support (" +
                std::to_string(B + trans.max_delay(B)) + ")");
    }
};

}  // namespace aoi_coopt
