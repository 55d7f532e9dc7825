#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrel/hypers.hpp"
#include "mrel/panel.hpp"
#include "mrel/partition.hpp"

namespace mrel {

using TransitionMatrix = std::vector<std::vector<double>>;

struct ModelParams {
    std::vector<double> base_rates;  // lambda, per edge
    TransitionMatrix transition;     // K x K, unit row sums
    std::vector<std::vector<double>> deviations;  // optional, [group][t]

    void validate() const {
        for (double l : base_rates)
            if (!(l > 0) || !std::isfinite(l))
                throw std::invalid_argument("params: base rates must be positive finite");
        for (const auto& row : transition) {
            double sum = 0;
            for (double p : row) {
                if (p < 0) throw std::invalid_argument("params: negative transition prob");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("params: transition row does not sum to 1");
        }
    }
};

/// Conjugate posterior parameters for one group-time deviation factor.
struct GroupTimeSuffStats {
    double c_prime = 0;       // c_s + sum_y
    double d_prime = 0;       // 1 / (1/d_s + sum_lambda)
    std::int64_t sum_y = 0;   // total count over members at this time
    double sum_lambda = 0;    // total base rate over members
};

inline GroupTimeSuffStats suff_stats_from_sums(const GammaEmission& em,
                                               std::int64_t sum_y, double sum_lambda) {
    GroupTimeSuffStats st;
    st.sum_y = sum_y;
    st.sum_lambda = sum_lambda;
    st.c_prime = em.shape + static_cast<double>(sum_y);
    st.d_prime = 1.0 / (1.0 / em.scale + sum_lambda);
    return st;
}

inline GroupTimeSuffStats suff_stats(const EdgeCountPanel& panel,
                                     const Partition& partition,
                                     std::span<const double> base_rates, int group,
                                     std::int64_t t, const GammaEmission& em) {
    if (group < 0 || group >= partition.n_groups() || partition.occupancy(group) < 1)
        throw std::invalid_argument("suff_stats: empty or invalid group");
    if (t < 0 || t >= panel.T) throw std::invalid_argument("suff_stats: time out of range");
    std::int64_t sum_y = 0;
    double sum_lambda = 0;
    for (std::size_t e = 0; e < panel.n_edges(); ++e) {
        if (partition.group_of(e) != group) continue;
        sum_y += panel.counts[e][t];
        sum_lambda += base_rates[e];
    }
    return suff_stats_from_sums(em, sum_y, sum_lambda);
}

/// State-dependent part of the collapsed group-time term:
///   -c_s log d_s - lgamma(c_s) + lgamma(c') + c' log d'
/// The member factor prod lambda^y / Gamma(y+1) does not depend on the state
/// and is added separately where it matters.
inline double emission_loglik(const GammaEmission& em, std::int64_t sum_y,
                              double sum_lambda) {
    double c_prime = em.shape + static_cast<double>(sum_y);
    double d_prime_inv = 1.0 / em.scale + sum_lambda;
    double ll = -em.shape * std::log(em.scale) - std::lgamma(em.shape) +
                std::lgamma(c_prime) - c_prime * std::log(d_prime_inv);
    if (!std::isfinite(ll))
        throw std::runtime_error("emission_loglik: nonfinite value (sum_y=" +
                                 std::to_string(sum_y) + ")");
    return ll;
}

/// Full collapsed group-time marginal log-likelihood (deviation factor
/// integrated out), including the member lambda^y / Gamma(y+1) factors.
inline double group_time_marginal_loglik(const GroupTimeSuffStats& st,
                                         const GammaEmission& em,
                                         std::span<const std::int64_t> member_y,
                                         std::span<const double> member_lambda) {
    double ll = -em.shape * std::log(em.scale) - std::lgamma(em.shape) +
                std::lgamma(st.c_prime) + st.c_prime * std::log(st.d_prime);
    for (std::size_t i = 0; i < member_y.size(); ++i)
        ll += static_cast<double>(member_y[i]) * std::log(member_lambda[i]) -
              std::lgamma(static_cast<double>(member_y[i]) + 1.0);
    if (!std::isfinite(ll))
        throw std::runtime_error("group_time_marginal_loglik: nonfinite value");
    return ll;
}

/// log CRP(Z | alpha) = log[ Gamma(a)/Gamma(n+a) * a^G * prod_g Gamma(n_g) ].
inline double crp_logprob(const Partition& partition, double alpha) {
    if (alpha <= 0) throw std::invalid_argument("crp_logprob: alpha must be positive");
    std::int64_t n = 0;
    double ll = 0;
    for (int g = 0; g < partition.n_groups(); ++g) {
        ll += std::lgamma(static_cast<double>(partition.occupancy(g)));
        n += partition.occupancy(g);
    }
    ll += partition.n_groups() * std::log(alpha);
    ll += std::lgamma(alpha) - std::lgamma(static_cast<double>(n) + alpha);
    return ll;
}

/// Within-path transitions only (t -> t+1 over the explicit states); the
/// virtual s^(0)=0 start is added by transition_counts_with_virtual_start.
inline std::vector<std::vector<std::int64_t>> transition_counts(
    const std::vector<GroupStatePath>& paths, int K) {
    std::vector<std::vector<std::int64_t>> n(K, std::vector<std::int64_t>(K, 0));
    for (const auto& path : paths)
        for (std::size_t t = 0; t + 1 < path.states.size(); ++t)
            ++n[path.states[t]][path.states[t + 1]];
    return n;
}

/// Counts including one virtual 0 -> s^(1) transition per path; these are the
/// counts that feed the Polya term and the transition-matrix posterior.
inline std::vector<std::vector<std::int64_t>> transition_counts_with_virtual_start(
    const std::vector<GroupStatePath>& paths, int K) {
    auto n = transition_counts(paths, K);
    for (const auto& path : paths)
        if (!path.states.empty()) ++n[0][path.states[0]];
    return n;
}

/// Sum over rows of log Dirichlet-multinomial(counts_row | beta_row).
inline double polya_logprob(const std::vector<std::vector<std::int64_t>>& counts,
                            const std::vector<std::vector<double>>& dirichlet_rows) {
    if (counts.size() != dirichlet_rows.size())
        throw std::invalid_argument("polya_logprob: row count mismatch");
    double ll = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
        double beta_sum = 0;
        std::int64_t n_sum = 0;
        for (std::size_t k = 0; k < counts[s].size(); ++k) {
            if (counts[s][k] < 0) throw std::invalid_argument("polya_logprob: negative count");
            ll += std::lgamma(dirichlet_rows[s][k] + static_cast<double>(counts[s][k])) -
                  std::lgamma(dirichlet_rows[s][k]);
            beta_sum += dirichlet_rows[s][k];
            n_sum += counts[s][k];
        }
        ll += std::lgamma(beta_sum) - std::lgamma(beta_sum + static_cast<double>(n_sum));
    }
    return ll;
}

/// log Gamma(x | shape, scale) density.
inline double gamma_logpdf(double x, double shape, double scale) {
    if (x <= 0) return -std::numeric_limits<double>::infinity();
    return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) -
           shape * std::log(scale);
}

/// Collapsed joint log-probability: group-time marginals
/// + Gamma prior on base rates + Polya over transition counts + CRP.
/// Used for MAP sample selection and as the samplers' reference density.
inline double joint_logprob(const EdgeCountPanel& panel, const Partition& partition,
                            std::span<const double> base_rates,
                            const std::vector<GroupStatePath>& paths,
                            const HyperParams& hypers, double gamma_shape,
                            double gamma_scale) {
    if (static_cast<int>(paths.size()) != partition.n_groups())
        throw std::invalid_argument("joint_logprob: one path per group required");
    double ll = 0;
    for (int g = 0; g < partition.n_groups(); ++g) {
        auto members = partition.members(g);
        std::vector<std::int64_t> y_t(members.size());
        std::vector<double> lam(members.size());
        double sum_lambda = 0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            lam[i] = base_rates[members[i]];
            sum_lambda += lam[i];
        }
        for (std::int64_t t = 0; t < panel.T; ++t) {
            int s = paths[g].states[t];
            const auto& em = hypers.emissions[s];
            std::int64_t sum_y = 0;
            for (std::size_t i = 0; i < members.size(); ++i) {
                y_t[i] = panel.counts[members[i]][t];
                sum_y += y_t[i];
            }
            auto st = suff_stats_from_sums(em, sum_y, sum_lambda);
            ll += group_time_marginal_loglik(st, em, y_t, lam);
        }
    }
    for (double l : base_rates) ll += gamma_logpdf(l, gamma_shape, gamma_scale);
    ll += polya_logprob(transition_counts_with_virtual_start(paths, hypers.K),
                        hypers.dirichlet_rows);
    ll += crp_logprob(partition, hypers.alpha);
    if (!std::isfinite(ll)) throw std::runtime_error("joint_logprob: nonfinite result");
    return ll;
}

/// Convenience overload using the prior values of (gamma1, gamma2) from hypers.
inline double joint_logprob(const EdgeCountPanel& panel, const Partition& partition,
                            std::span<const double> base_rates,
                            const std::vector<GroupStatePath>& paths,
                            const HyperParams& hypers) {
    return joint_logprob(panel, partition, base_rates, paths, hypers,
                         hypers.gamma_shape, hypers.gamma_scale);
}

}  // namespace mrel
