#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aoi_coopt {

/**
 * Expected inference error err(delta, l) on a finite grid
 * delta in {0..delta_bound}, l in {1..B}.
 *
 * Lookups clamp delta into [0, delta_bound]; the saturated row stands in for
 * every larger age. Row 0 is stored even though simulated ages are >= 1: index
 * arguments of the form delta + j + T are always >= 1, but keeping the row
 * simplifies offsets and costs one row of memory.
 *
 * Immutable after construction and safe to share across threads.
 */
class InferenceErrorTable {
public:
    /// values holds (delta_bound+1) rows of B entries, row-major, delta = 0 first.
    InferenceErrorTable(int B, int delta_bound, std::vector<double> values)
        : B_(B), delta_bound_(delta_bound), v_(std::move(values)) {
        if (B_ < 1) throw std::invalid_argument("error table: B must be >= 1");
        if (delta_bound_ < 1)
            throw std::invalid_argument("error table: delta_bound must be >= 1");
        if (v_.size() != static_cast<size_t>(delta_bound_ + 1) * B_)
            throw std::invalid_argument("error table: values size does not match (delta_bound+1) x B");
        for (double x : v_)
            if (!std::isfinite(x))
                throw std::invalid_argument("error table: non-finite entry");
        build_prefix();
    }

    /// err identically c.
    static InferenceErrorTable constant(double c, int B, int delta_bound) {
        return InferenceErrorTable(B, delta_bound,
                                   std::vector<double>((delta_bound + 1) * B, c));
    }

    /// err(delta, l) = slope * delta, length-independent.
    static InferenceErrorTable linear(double slope, int B, int delta_bound) {
        std::vector<double> v;
        v.reserve(static_cast<size_t>(delta_bound + 1) * B);
        for (int delta = 0; delta <= delta_bound; ++delta)
            for (int l = 1; l <= B; ++l) v.push_back(slope * delta);
        return InferenceErrorTable(B, delta_bound, std::move(v));
    }

    /// Verbatim matrix: rows[delta][l-1], delta = 0..delta_bound.
    static InferenceErrorTable custom(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw std::invalid_argument("custom table: no rows");
        const size_t B = rows.front().size();
        if (B == 0) throw std::invalid_argument("custom table: empty row");
        std::vector<double> v;
        v.reserve(rows.size() * B);
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != B)
                throw std::invalid_argument("custom table: ragged row " + std::to_string(i));
            v.insert(v.end(), rows[i].begin(), rows[i].end());
        }
        return InferenceErrorTable(static_cast<int>(B), static_cast<int>(rows.size()) - 1,
                                   std::move(v));
    }

    int B() const { return B_; }
    int delta_bound() const { return delta_bound_; }

    /// err(delta, l) with delta clamped into [0, delta_bound].
    double lookup(long long delta, int l) const {
        check_length(l);
        return v_[static_cast<size_t>(clamp(delta)) * B_ + (l - 1)];
    }

    double operator()(long long delta, int l) const { return lookup(delta, l); }

    /// Sum of n consecutive clamped entries: sum_{k=0}^{n-1} err(delta+k, l).
    double window_sum(long long delta, long long n, int l) const {
        check_length(l);
        if (n <= 0) return 0.0;
        return cum(delta + n - 1, l) - cum(delta - 1, l);
    }

    double min_value() const { return min_; }
    double max_value() const { return max_; }

    /// True when every length column is non-decreasing in delta.
    bool monotone_in_delta() const {
        for (int l = 1; l <= B_; ++l)
            for (int delta = 1; delta <= delta_bound_; ++delta)
                if (lookup(delta, l) < lookup(delta - 1, l)) return false;
        return true;
    }

    /// Copy restricted to lengths 1..B and rows 0..delta_bound.
    InferenceErrorTable truncated(int B, int delta_bound) const {
        if (B < 1 || B > B_ || delta_bound < 1 || delta_bound > delta_bound_)
            throw std::invalid_argument("truncated: dimensions exceed table");
        std::vector<double> v;
        v.reserve(static_cast<size_t>(delta_bound + 1) * B);
        for (int delta = 0; delta <= delta_bound; ++delta)
            for (int l = 1; l <= B; ++l) v.push_back(lookup(delta, l));
        return InferenceErrorTable(B, delta_bound, std::move(v));
    }

    bool operator==(const InferenceErrorTable& o) const {
        return B_ == o.B_ && delta_bound_ == o.delta_bound_ && v_ == o.v_;
    }

private:
    long long clamp(long long delta) const {
        return std::max(0LL, std::min<long long>(delta, delta_bound_));
    }
    void check_length(int l) const {
        if (l < 1 || l > B_)
            throw std::out_of_range("error table: length " + std::to_string(l) +
                                    " outside 1.." + std::to_string(B_));
    }
    // cum(x, l) = sum_{u=0}^{x} err_clamped(u, l), extended linearly past the
    // bound so clamped window sums stay O(1); cum(-1, l) = 0.
    double cum(long long x, int l) const {
        if (x < 0) return 0.0;
        if (x <= delta_bound_)
            return prefix_[static_cast<size_t>(x) * B_ + (l - 1)];
        return prefix_[static_cast<size_t>(delta_bound_) * B_ + (l - 1)] +
               static_cast<double>(x - delta_bound_) * v_[static_cast<size_t>(delta_bound_) * B_ + (l - 1)];
    }
    void build_prefix() {
        prefix_.assign(v_.size(), 0.0);
        for (int l = 0; l < B_; ++l) {
            double s = 0.0;
            for (int delta = 0; delta <= delta_bound_; ++delta) {
                s += v_[static_cast<size_t>(delta) * B_ + l];
                prefix_[static_cast<size_t>(delta) * B_ + l] = s;
            }
        }
        min_ = *std::min_element(v_.begin(), v_.end());
        max_ = *std::max_element(v_.begin(), v_.end());
    }

    int B_;
    int delta_bound_;
    std::vector<double> v_;
    std::vector<double> prefix_;
    double min_ = 0.0, max_ = 0.0;
};

namespace detail {

inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace detail

/**
 * CSV layout (bit-exact round trip):
 *   optional '#' comment lines, then the header `delta,l=1,...,l=B`,
 *   then rows `delta,v1,...,vB` for delta = 0..delta_bound in order.
 * Values are printed with 17 significant digits so doubles survive the trip.
 * Comment lines of the form `# B=<int>` / `# delta_bound=<int>` are written as
 * metadata and cross-checked on load when present.
 */
inline void save_csv(const InferenceErrorTable& t, std::ostream& out) {
    out << "# inference error table\n";
    out << "# B=" << t.B() << "\n";
    out << "# delta_bound=" << t.delta_bound() << "\n";
    out << "delta";
    for (int l = 1; l <= t.B(); ++l) out << ",l=" << l;
    out << "\n";
    for (int delta = 0; delta <= t.delta_bound(); ++delta) {
        out << delta;
        for (int l = 1; l <= t.B(); ++l) out << "," << detail::format_g17(t.lookup(delta, l));
        out << "\n";
    }
}

inline void save_csv(const InferenceErrorTable& t, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    save_csv(t, f);
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline InferenceErrorTable load_csv(std::istream& in, const std::string& name = "<stream>") {
    auto fail = [&](int row, const std::string& msg) -> void {
        throw std::runtime_error(name + ": row " + std::to_string(row) + ": " + msg);
    };
    std::string line;
    int row = 0;
    int declared_B = -1, declared_bound = -1;
    // comments, then header
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream c(line.substr(1));
            std::string tok;
            while (c >> tok) {
                if (tok.rfind("B=", 0) == 0) declared_B = std::atoi(tok.c_str() + 2);
                if (tok.rfind("delta_bound=", 0) == 0)
                    declared_bound = std::atoi(tok.c_str() + 12);
            }
            continue;
        }
        break;
    }
    if (line.empty() || line[0] == '#')
        throw std::runtime_error(name + ": missing header line");
    if (line.rfind("delta", 0) != 0) fail(row, "header must start with 'delta'");
    int B = 0;
    {
        std::istringstream h(line);
        std::string cell;
        std::getline(h, cell, ',');  // "delta"
        if (cell != "delta") fail(row, "header must start with 'delta'");
        while (std::getline(h, cell, ',')) {
            ++B;
            if (cell != "l=" + std::to_string(B))
                fail(row, "expected column 'l=" + std::to_string(B) + "', got '" + cell + "'");
        }
        if (B == 0) fail(row, "header has no length columns");
    }
    if (declared_B >= 0 && declared_B != B)
        fail(row, "metadata declares B=" + std::to_string(declared_B) +
                      " but header has " + std::to_string(B) + " columns");
    std::vector<double> values;
    int expect_delta = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream r(line);
        std::string cell;
        int col = 0;
        if (!std::getline(r, cell, ',')) fail(row, "empty row");
        ++col;
        char* end = nullptr;
        long delta = std::strtol(cell.c_str(), &end, 10);
        if (end == cell.c_str() || *end != '\0')
            fail(row, "column 1: non-integer delta '" + cell + "'");
        if (delta != expect_delta)
            fail(row, "delta rows must be contiguous from 0; expected " +
                          std::to_string(expect_delta) + ", got " + std::to_string(delta));
        for (int l = 1; l <= B; ++l) {
            if (!std::getline(r, cell, ','))
                fail(row, "ragged row: expected " + std::to_string(B + 1) + " columns, got " +
                              std::to_string(col));
            ++col;
            end = nullptr;
            double x = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                fail(row, "column " + std::to_string(col) + ": non-numeric cell '" + cell + "'");
            if (!std::isfinite(x))
                fail(row, "column " + std::to_string(col) + ": non-finite value");
            values.push_back(x);
        }
        if (std::getline(r, cell, ','))
            fail(row, "ragged row: more than " + std::to_string(B + 1) + " columns");
        ++expect_delta;
    }
    if (expect_delta < 2) throw std::runtime_error(name + ": need rows for delta = 0 and 1");
    int bound = expect_delta - 1;
    if (declared_bound >= 0 && declared_bound != bound)
        throw std::runtime_error(name + ": metadata declares delta_bound=" +
                                 std::to_string(declared_bound) + " but file has rows 0.." +
                                 std::to_string(bound));
    return InferenceErrorTable(B, bound, std::move(values));
}

inline InferenceErrorTable load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return load_csv(f, path);
}

}  // namespace aoi_coopt
