#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrel {

/// Gamma emission for one HMM state, shape/scale parameterization
/// (mean = shape*scale, variance = shape*scale^2).
struct GammaEmission {
    double shape = 1.0;
    double scale = 1.0;

    double mean() const { return shape * scale; }
    double variance() const { return shape * scale * scale; }

    static GammaEmission from_mean_variance(double mean, double variance) {
        if (mean <= 0 || variance <= 0)
            throw std::invalid_argument("emission mean/variance must be positive");
        return {mean * mean / variance, variance / mean};
    }
};

struct HyperParams {
    double alpha = 1.0;        // CRP concentration
    double gamma_shape = 2.0;  // base-rate Gamma prior shape
    double gamma_scale = 5.0;  // base-rate Gamma prior scale
    int K = 2;                 // number of HMM states; state 0 is the spike
    std::vector<GammaEmission> emissions;        // one per state
    std::vector<std::vector<double>> dirichlet_rows;  // K rows of K positives

    void validate() const {
        if (alpha <= 0) throw std::invalid_argument("hypers: alpha must be positive");
        if (gamma_shape <= 0 || gamma_scale <= 0)
            throw std::invalid_argument("hypers: gamma prior params must be positive");
        if (K < 2) throw std::invalid_argument("hypers: K must be >= 2");
        if (static_cast<int>(emissions.size()) != K)
            throw std::invalid_argument("hypers: need one emission per state");
        for (const auto& em : emissions)
            if (em.shape <= 0 || em.scale <= 0)
                throw std::invalid_argument("hypers: emission params must be positive");
        if (static_cast<int>(dirichlet_rows.size()) != K)
            throw std::invalid_argument("hypers: need K dirichlet rows");
        for (const auto& row : dirichlet_rows) {
            if (static_cast<int>(row.size()) != K)
                throw std::invalid_argument("hypers: dirichlet row length != K");
            for (double b : row)
                if (b <= 0) throw std::invalid_argument("hypers: dirichlet entries must be positive");
        }
    }

    /// Configuration lint: warnings, not errors.  The spike (state 0) is
    /// expected to concentrate tightly at 1 relative to the slab states.
    std::vector<std::string> lint() const {
        std::vector<std::string> warnings;
        if (emissions.empty()) return warnings;
        const auto& spike = emissions[0];
        if (std::abs(spike.mean() - 1.0) > 0.25)
            warnings.push_back("spike mean " + std::to_string(spike.mean()) +
                               " is not near 1");
        for (std::size_t s = 1; s < emissions.size(); ++s)
            if (spike.variance() > 0.1 * emissions[s].variance())
                warnings.push_back("spike variance " + std::to_string(spike.variance()) +
                                   " is not small relative to slab state " +
                                   std::to_string(s));
        return warnings;
    }
};

/// The synthetic-experiment configuration: alpha=1, Gamma(2,5) base rates,
/// 2-state HMM with Dirichlet rows (800,80),(200,600), spike Gamma(1000,1e-4),
/// slab Gamma(4,1).
inline HyperParams synthetic_2013_hypers() {
    HyperParams h;
    h.alpha = 1.0;
    h.gamma_shape = 2.0;
    h.gamma_scale = 5.0;
    h.K = 2;
    h.emissions = {{1000.0, 0.0001}, {4.0, 1.0}};
    h.dirichlet_rows = {{800.0, 80.0}, {200.0, 600.0}};
    return h;
}

/// The event-data configuration: spike mean 1 / variance 0.001, slab mean 4 /
/// variance 16.
inline HyperParams gdelt_2013_hypers() {
    HyperParams h = synthetic_2013_hypers();
    h.emissions = {GammaEmission::from_mean_variance(1.0, 0.001),
                   GammaEmission::from_mean_variance(4.0, 16.0)};
    return h;
}

}  // namespace mrel
