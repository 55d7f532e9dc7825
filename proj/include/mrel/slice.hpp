#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "mrel/rng.hpp"

namespace mrel {

struct SliceConfig {
    double initial_width = 1.0;
    int max_stepout_doublings = 30;
    int max_shrink_iterations = 100;
};

struct SliceDiagnostics {
    std::int64_t shrink_exhausted = 0;
};

namespace detail {

/// Doubling-scheme acceptance check (required for reversibility when the
/// interval was grown by doubling).
template <typename LogF>
bool slice_doubling_acceptable(LogF&& logf, double x0, double x1, double log_y,
                               double w, double lo, double hi) {
    bool d = false;
    while (hi - lo > 1.1 * w) {
        double mid = 0.5 * (lo + hi);
        if ((x0 < mid && x1 >= mid) || (x0 >= mid && x1 < mid)) d = true;
        if (x1 < mid) hi = mid;
        else lo = mid;
        if (d && logf(lo) < log_y && logf(hi) < log_y) return false;
    }
    return true;
}

}  // namespace detail

/// Univariate slice sampler on an unbounded axis: doubling step-out plus
/// shrinkage.  If the shrink budget is exhausted the current point is kept
/// and diag->shrink_exhausted is incremented.
template <typename LogF>
double slice_sample(double x0, LogF&& logf, const SliceConfig& cfg, RngStream& rng,
                    SliceDiagnostics* diag = nullptr) {
    const double log_fx0 = logf(x0);
    if (!std::isfinite(log_fx0)) return x0;  // cannot slice from a zero-density point
    double u = rng.uniform();
    const double log_y = log_fx0 + std::log(u > 0 ? u : std::numeric_limits<double>::min());

    double w = cfg.initial_width;
    double lo = x0 - w * rng.uniform();
    double hi = lo + w;
    for (int k = 0; k < cfg.max_stepout_doublings; ++k) {
        if (logf(lo) <= log_y && logf(hi) <= log_y) break;
        if (rng.uniform() < 0.5) lo -= (hi - lo);
        else hi += (hi - lo);
    }

    const double lo0 = lo, hi0 = hi;
    for (int k = 0; k < cfg.max_shrink_iterations; ++k) {
        double x1 = rng.uniform(lo, hi);
        if (logf(x1) > log_y &&
            detail::slice_doubling_acceptable(logf, x0, x1, log_y, w, lo0, hi0))
            return x1;
        if (x1 < x0) lo = x1;
        else hi = x1;
        if (!(hi > lo)) break;
    }
    if (diag) ++diag->shrink_exhausted;
    return x0;
}

}  // namespace mrel
