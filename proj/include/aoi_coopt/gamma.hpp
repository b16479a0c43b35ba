#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include "aoi_coopt/core.hpp"

namespace aoi_coopt {

/**
 * Threshold index gamma_l(delta, d): the smallest achievable running mean of
 * expected errors E[err(delta + j + T(l), d)] over horizons tau >= 1.
 *
 * With err clamped at delta_bound the sequence of one-step expectations is
 * eventually constant at the saturation row, so the running mean for
 * tau > delta_bound moves monotonically toward that constant. Taking the
 * minimum over tau in {1..delta_bound} together with the saturation value
 * (the tau -> infinity Cesaro limit) therefore evaluates the infimum exactly.
 *
 * The inner sums run in fixed ascending order so results are byte-identical
 * regardless of how callers parallelize over grid entries.
 */
inline double gamma(const InferenceErrorTable& table, const TransmissionModel& trans, int l,
                    long long delta, int d) {
    if (delta < 0) delta = 0;  // lookups clamp low at zero
    const auto& sup = trans.support(l);
    double best = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (int tau = 1; tau <= table.delta_bound(); ++tau) {
        double step = 0.0;
        for (const auto& [t, p] : sup) step += p * table.lookup(delta + (tau - 1) + t, d);
        sum += step;
        double mean = sum / tau;
        if (mean < best) best = mean;
    }
    double saturation = 0.0;
    for (const auto& [t, p] : sup) saturation += p * table.lookup(table.delta_bound(), d);
    if (saturation < best) best = saturation;
    return best;
}

/**
 * gamma memoized over the full grid; entry-wise equal to gamma(). The stored
 * rows start at delta = 0 because the runtime threshold rule may be queried
 * at the age-zero boundary.
 */
class GammaTable {
public:
    GammaTable(const InferenceErrorTable& table, const TransmissionModel& trans, int B)
        : B_(B), delta_bound_(table.delta_bound()) {
        if (B_ < 1 || B_ > table.B() || B_ > trans.B())
            throw std::invalid_argument("gamma table: B inconsistent with inputs");
        g_.resize(static_cast<size_t>(B_) * B_ * (delta_bound_ + 1));
        for (int l = 1; l <= B_; ++l)
            for (int d = 1; d <= B_; ++d)
                for (int delta = 0; delta <= delta_bound_; ++delta)
                    g_[index(l, delta, d)] = gamma(table, trans, l, delta, d);
    }

    double operator()(int l, long long delta, int d) const {
        if (l < 1 || l > B_ || d < 1 || d > B_)
            throw std::out_of_range("gamma table: l or d out of range");
        if (delta < 0) delta = 0;
        if (delta > delta_bound_) delta = delta_bound_;
        return g_[index(l, delta, d)];
    }

    int B() const { return B_; }
    int delta_bound() const { return delta_bound_; }

private:
    size_t index(int l, long long delta, int d) const {
        return (static_cast<size_t>(l - 1) * B_ + (d - 1)) * (delta_bound_ + 1) + delta;
    }

    int B_;
    int delta_bound_;
    std::vector<double> g_;
};

}  // namespace aoi_coopt
