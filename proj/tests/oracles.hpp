// Test-only oracles, independent of the library's computation paths.
#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mrel/hypers.hpp"
#include "mrel/partition.hpp"

namespace oracle {

/// log of integral over delta in (0, inf) of
///   prod_i Pois(y_i | lambda_i * delta) * Gamma(delta | c, d)
/// by adaptive quadrature on a peak-shifted integrand.
inline double marginal_by_quadrature(double c, double d,
                                     const std::vector<std::int64_t>& y,
                                     const std::vector<double>& lambda,
                                     double tolerance = 1e-10) {
    auto log_integrand = [&](double delta) {
        if (delta <= 0) return -std::numeric_limits<double>::infinity();
        double ll = (c - 1.0) * std::log(delta) - delta / d - std::lgamma(c) -
                    c * std::log(d);
        for (std::size_t i = 0; i < y.size(); ++i)
            ll += static_cast<double>(y[i]) * std::log(lambda[i] * delta) -
                  lambda[i] * delta - std::lgamma(static_cast<double>(y[i]) + 1.0);
        return ll;
    };
    // Posterior is Gamma(c + sum y, d'), so the peak location is closed-form.
    double sum_y = 0, sum_lambda = 0;
    for (auto v : y) sum_y += static_cast<double>(v);
    for (auto v : lambda) sum_lambda += v;
    double d_post = 1.0 / (1.0 / d + sum_lambda);
    double mode = std::max((c + sum_y - 1.0) * d_post, 1e-6);
    const double shift = log_integrand(mode);

    boost::math::quadrature::exp_sinh<double> integrator;
    double value = integrator.integrate(
        [&](double delta) { return std::exp(log_integrand(delta) - shift); }, tolerance);
    return shift + std::log(value);
}

/// Enumerates all set partitions of {0..n-1} as label vectors in canonical
/// (first-appearance) form.
inline void enumerate_partitions(int n, const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> labels(n, 0);
    std::function<void(int, int)> rec = [&](int i, int n_used) {
        if (i == n) {
            visit(labels);
            return;
        }
        for (int g = 0; g <= n_used; ++g) {
            labels[i] = g;
            rec(i + 1, g == n_used ? n_used + 1 : n_used);
        }
    };
    rec(0, 0);
}

/// Enumerates all K^T state paths of length T.
inline void enumerate_paths(int T, int K,
                            const std::function<void(const std::vector<int>&)>& visit) {
    std::vector<int> states(T, 0);
    std::function<void(int)> rec = [&](int t) {
        if (t == T) {
            visit(states);
            return;
        }
        for (int s = 0; s < K; ++s) {
            states[t] = s;
            rec(t + 1);
        }
    };
    rec(0);
}

inline double logsumexp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace oracle
