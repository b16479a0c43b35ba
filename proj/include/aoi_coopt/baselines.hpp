#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "aoi_coopt/core.hpp"

namespace aoi_coopt {

/**
 * Reference policies: generate-at-will zero wait, periodic submission into an
 * FCFS queue, and maximum-age-first source selection. Parsed from the spec
 * strings `zero-wait:l=1`, `periodic:tp=4,l=1`, `maf:l=B` (an `l=B` token
 * resolves against the buffer size).
 */
struct BaselineSpec {
    enum class Kind { zero_wait, periodic, maf };
    Kind kind = Kind::zero_wait;
    int l = 1;
    int tp = 1;  // periodic only

    static BaselineSpec parse(const std::string& text, int B);
    std::string str() const;
};

inline BaselineSpec BaselineSpec::parse(const std::string& text, int B) {
    auto colon = text.find(':');
    std::string head = text.substr(0, colon);
    BaselineSpec s;
    if (head == "zero-wait")
        s.kind = Kind::zero_wait;
    else if (head == "periodic")
        s.kind = Kind::periodic;
    else if (head == "maf")
        s.kind = Kind::maf;
    else
        throw std::invalid_argument("BaselineSpec: unknown policy '" + head + "'");
    bool saw_l = false;
    std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    while (!rest.empty()) {
        auto comma = rest.find(',');
        std::string item = rest.substr(0, comma);
        rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("BaselineSpec: malformed parameter '" + item + "'");
        std::string key = item.substr(0, eq), val = item.substr(eq + 1);
        if (key == "l") {
            s.l = val == "B" ? B : std::stoi(val);
            saw_l = true;
        } else if (key == "tp" && s.kind == Kind::periodic) {
            s.tp = std::stoi(val);
        } else {
            throw std::invalid_argument("BaselineSpec: unknown parameter '" + key + "' for " + head);
        }
    }
    if (!saw_l) throw std::invalid_argument("BaselineSpec: missing l in '" + text + "'");
    if (s.l < 1 || s.l > B) throw std::invalid_argument("BaselineSpec: l out of range in '" + text + "'");
    if (s.kind == Kind::periodic && s.tp < 1)
        throw std::invalid_argument("BaselineSpec: tp must be >= 1 in '" + text + "'");
    return s;
}

inline std::string BaselineSpec::str() const {
    switch (kind) {
        case Kind::zero_wait: return "zero-wait:l=" + std::to_string(l);
        case Kind::periodic: return "periodic:tp=" + std::to_string(tp) + ",l=" + std::to_string(l);
        case Kind::maf: return "maf:l=" + std::to_string(l);
    }
    return "";
}

/// Transmit immediately with the fixed length, freshest position.
inline Action zero_wait_decide(int l) { return {0, l, 0}; }

/// Top min{floor(N/l), M} sources by age, ties toward the smaller index;
/// each selected source transmits (l, b = 0). Returns selected indices.
inline std::vector<int> maf_select(const std::vector<SystemState>& states, int N, int l) {
    const int M = static_cast<int>(states.size());
    std::vector<int> order(M);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return states[a].delta > states[b].delta; });
    int take = std::min<int>(N / l, M);
    order.resize(std::max(take, 0));
    return order;
}

}  // namespace aoi_coopt
