#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mrel/model.hpp"
#include "mrel/rng.hpp"
#include "mrel/slice.hpp"

namespace mrel {

struct Algo8Config {
    int m_aux = 3;  // auxiliary empty-group path draws per assignment update
};

/// Maintained per-group sufficient-statistic sums.  sum_y is updated
/// incrementally (exact integer arithmetic); sum_lambda is recomputed from the
/// member list in edge-index order on every change, so its value is a pure
/// function of the current state regardless of update history.
struct GroupStats {
    std::vector<std::int64_t> sum_y;  // per time slice
    double sum_lambda = 0;
    std::vector<int> members;  // edge indices, increasing
};

/// Full mutable state of one MCMC chain.
struct ChainState {
    const EdgeCountPanel* panel = nullptr;
    HyperParams hypers;  // alpha, K, emissions, dirichlet rows (fixed)
    double gamma_shape = 2.0, gamma_scale = 5.0;  // sampled (gamma1, gamma2)

    Partition partition;
    std::vector<GroupStatePath> paths;  // indexed by group label (may hold empty slots mid-sweep)
    std::vector<double> base_rates;
    TransitionMatrix theta;

    std::vector<GroupStats> stats;  // parallel to paths

    void rebuild_stats() {
        const std::int64_t T = panel->T;
        stats.assign(partition.n_groups(), GroupStats{});
        for (auto& st : stats) st.sum_y.assign(T, 0);
        for (std::size_t e = 0; e < panel->n_edges(); ++e) {
            int g = partition.group_of(e);
            stats[g].members.push_back(static_cast<int>(e));
            for (std::int64_t t = 0; t < T; ++t) stats[g].sum_y[t] += panel->counts[e][t];
        }
        for (auto& st : stats) recompute_sum_lambda(st);
    }

    void recompute_sum_lambda(GroupStats& st) const {
        double s = 0;
        for (int e : st.members) s += base_rates[e];
        st.sum_lambda = s;
    }

    /// Drops empty group slots, relabels canonically, permutes paths/stats.
    void canonicalize() {
        auto relabel = partition.canonicalize();
        std::vector<GroupStatePath> new_paths(partition.n_groups());
        std::vector<GroupStats> new_stats(partition.n_groups());
        for (std::size_t g = 0; g < relabel.size(); ++g) {
            if (relabel[g] < 0) continue;
            new_paths[relabel[g]] = std::move(paths[g]);
            new_stats[relabel[g]] = std::move(stats[g]);
        }
        paths = std::move(new_paths);
        stats = std::move(new_stats);
    }

    double joint_logprob() const {
        return mrel::joint_logprob(*panel, partition, base_rates, paths, hypers,
                                   gamma_shape, gamma_scale);
    }
};

/// Draws a state path of length T from the HMM prior: s^(0)=0, transitions
/// from theta.
inline GroupStatePath sample_path_from_prior(const TransitionMatrix& theta,
                                             std::int64_t T, RngStream& rng) {
    GroupStatePath path;
    path.states.resize(T);
    int prev = 0;
    for (std::int64_t t = 0; t < T; ++t) {
        int s = static_cast<int>(rng.categorical(theta[prev]));
        path.states[t] = s;
        prev = s;
    }
    return path;
}

inline double path_prior_logprob(const GroupStatePath& path, const TransitionMatrix& theta) {
    double ll = 0;
    int prev = 0;
    for (int s : path.states) {
        ll += std::log(theta[prev][s]);
        prev = s;
    }
    return ll;
}

// ---------------------------------------------------------------------------
// Base-rate slice update
// ---------------------------------------------------------------------------

/// Slice-samples lambda for one edge on the log axis.  Conditional:
///   Gamma(lambda | g1, g2) * lambda^{sum_t y} * prod_t (d'_t)^{c'_t}
/// where d'_t couples to lambda through the group sum of base rates.
inline double slice_sample_base_rate(ChainState& state, int edge,
                                     const SliceConfig& cfg, RngStream& rng,
                                     SliceDiagnostics* diag = nullptr) {
    const auto& panel = *state.panel;
    const int g = state.partition.group_of(edge);
    GroupStats& st = state.stats[g];
    const auto& path = state.paths[g];

    double rest = 0;  // group lambda sum excluding this edge, in index order
    for (int e : st.members)
        if (e != edge) rest += state.base_rates[e];

    std::int64_t edge_sum_y = 0;
    for (std::int64_t t = 0; t < panel.T; ++t) edge_sum_y += panel.counts[edge][t];

    // Per-time constants: c'_t and 1/d_{s_t}.
    std::vector<double> c_prime(panel.T), inv_scale(panel.T);
    for (std::int64_t t = 0; t < panel.T; ++t) {
        const auto& em = state.hypers.emissions[path.states[t]];
        c_prime[t] = em.shape + static_cast<double>(st.sum_y[t]);
        inv_scale[t] = 1.0 / em.scale;
    }

    const double g1 = state.gamma_shape, g2 = state.gamma_scale;
    auto logf = [&](double u) {
        double lambda = std::exp(u);
        if (!std::isfinite(lambda) || lambda <= 0)
            return -std::numeric_limits<double>::infinity();
        // log prior + Jacobian + lambda^{sum y}
        double ll = g1 * u - lambda / g2;  // (g1-1)u + u from the log-axis Jacobian
        ll += static_cast<double>(edge_sum_y) * u;
        for (std::int64_t t = 0; t < panel.T; ++t)
            ll -= c_prime[t] * std::log(inv_scale[t] + rest + lambda);
        return ll;
    };

    double u0 = std::log(state.base_rates[edge]);
    double u1 = slice_sample(u0, logf, cfg, rng, diag);
    state.base_rates[edge] = std::exp(u1);
    state.recompute_sum_lambda(st);
    return state.base_rates[edge];
}

// ---------------------------------------------------------------------------
// (gamma1, gamma2) hyperparameter slice update
// ---------------------------------------------------------------------------

/// Bounds of the log-uniform hyperprior on each of gamma1, gamma2.
inline constexpr double kGammaHyperLo = 1e-3;
inline constexpr double kGammaHyperHi = 1e3;

/// Coordinate-wise slice updates of the base-rate prior's shape and scale,
/// targeting prod_n Gamma(lambda_n | g1, g2) under independent log-uniform
/// hyperpriors on [1e-3, 1e3].
inline void slice_sample_gamma_hypers(ChainState& state, const SliceConfig& cfg,
                                      RngStream& rng, SliceDiagnostics* diag = nullptr) {
    double sum_log = 0, sum = 0;
    for (double l : state.base_rates) {
        sum_log += std::log(l);
        sum += l;
    }
    const double n = static_cast<double>(state.base_rates.size());
    const double lo = std::log(kGammaHyperLo), hi = std::log(kGammaHyperHi);

    auto loglik = [&](double g1, double g2) {
        return (g1 - 1.0) * sum_log - sum / g2 - n * std::lgamma(g1) -
               n * g1 * std::log(g2);
    };

    {  // shape, on the log axis (log-uniform prior is flat here)
        double g2 = state.gamma_scale;
        auto logf = [&](double u) {
            if (u < lo || u > hi) return -std::numeric_limits<double>::infinity();
            return loglik(std::exp(u), g2);
        };
        state.gamma_shape = std::exp(slice_sample(std::log(state.gamma_shape), logf,
                                                  cfg, rng, diag));
    }
    {  // scale
        double g1 = state.gamma_shape;
        auto logf = [&](double u) {
            if (u < lo || u > hi) return -std::numeric_limits<double>::infinity();
            return loglik(g1, std::exp(u));
        };
        state.gamma_scale = std::exp(slice_sample(std::log(state.gamma_scale), logf,
                                                  cfg, rng, diag));
    }
}

// ---------------------------------------------------------------------------
// Algorithm-8 group assignment update
// ---------------------------------------------------------------------------

/// Log weight of attaching `edge` to an existing group with stats `st` under
/// path `path` (occupancy factor excluded; the edge's own lambda^y factors are
/// state- and group-independent and dropped throughout).
inline double attach_logweight(const ChainState& state, int edge,
                               const GroupStats& st, const GroupStatePath& path) {
    const auto& panel = *state.panel;
    const double lam = state.base_rates[edge];
    double ll = 0;
    for (std::int64_t t = 0; t < panel.T; ++t) {
        const auto& em = state.hypers.emissions[path.states[t]];
        ll += emission_loglik(em, st.sum_y[t] + panel.counts[edge][t],
                              st.sum_lambda + lam) -
              emission_loglik(em, st.sum_y[t], st.sum_lambda);
    }
    return ll;
}

/// Log weight of `edge` alone in a fresh group with the given path.
inline double singleton_logweight(const ChainState& state, int edge,
                                  const GroupStatePath& path) {
    const auto& panel = *state.panel;
    const double lam = state.base_rates[edge];
    double ll = 0;
    for (std::int64_t t = 0; t < panel.T; ++t) {
        const auto& em = state.hypers.emissions[path.states[t]];
        ll += emission_loglik(em, panel.counts[edge][t], lam);
    }
    return ll;
}

struct Algo8Choice {
    std::vector<int> groups;               // candidate existing group labels
    std::vector<GroupStatePath> aux_paths; // candidate new-group paths
    std::vector<double> logweights;        // groups first, then aux paths
};

/// Computes the Algorithm-8 conditional for a detached edge.  If the edge was
/// a singleton, its former path must be supplied as aux_paths[0] by the
/// caller (Neal's reuse rule); remaining aux paths are fresh prior draws.
inline Algo8Choice algo8_choice(const ChainState& state, int edge,
                                std::vector<GroupStatePath> aux_paths) {
    Algo8Choice ch;
    ch.aux_paths = std::move(aux_paths);
    const double m = static_cast<double>(ch.aux_paths.size());
    for (int g = 0; g < state.partition.n_groups(); ++g) {
        if (state.partition.occupancy(g) < 1) continue;
        ch.groups.push_back(g);
        ch.logweights.push_back(std::log(static_cast<double>(state.partition.occupancy(g))) +
                                attach_logweight(state, edge, state.stats[g], state.paths[g]));
    }
    for (const auto& path : ch.aux_paths)
        ch.logweights.push_back(std::log(state.hypers.alpha / m) +
                                singleton_logweight(state, edge, path));
    return ch;
}

namespace detail {

inline void stats_remove_edge(const EdgeCountPanel& panel, ChainState& state, int g,
                              int edge) {
    GroupStats& st = state.stats[g];
    st.members.erase(std::find(st.members.begin(), st.members.end(), edge));
    for (std::int64_t t = 0; t < panel.T; ++t) st.sum_y[t] -= panel.counts[edge][t];
    state.recompute_sum_lambda(st);
}

inline void stats_add_edge(const EdgeCountPanel& panel, ChainState& state, int g,
                           int edge) {
    GroupStats& st = state.stats[g];
    if (st.sum_y.empty()) st.sum_y.assign(panel.T, 0);
    st.members.insert(std::lower_bound(st.members.begin(), st.members.end(), edge), edge);
    for (std::int64_t t = 0; t < panel.T; ++t) st.sum_y[t] += panel.counts[edge][t];
    state.recompute_sum_lambda(st);
}

}  // namespace detail

/// One Algorithm-8 Gibbs update of a single edge's group assignment.  May
/// create a new group whose path is the chosen auxiliary draw.  Emptied groups
/// are cleaned up immediately; label compaction happens at sweep end.
inline void gibbs_group_assignment(ChainState& state, int edge, const Algo8Config& cfg,
                                   RngStream& rng) {
    const auto& panel = *state.panel;
    const int g_old = state.partition.group_of(edge);
    const bool was_singleton = state.partition.occupancy(g_old) == 1;

    state.partition.remove_edge(edge);
    std::vector<GroupStatePath> aux;
    aux.reserve(cfg.m_aux);
    if (was_singleton) {
        aux.push_back(state.paths[g_old]);  // Neal's reuse of the orphaned component
        state.paths[g_old] = GroupStatePath{};
        state.stats[g_old] = GroupStats{};
    } else {
        detail::stats_remove_edge(panel, state, g_old, edge);
    }
    while (static_cast<int>(aux.size()) < cfg.m_aux)
        aux.push_back(sample_path_from_prior(state.theta, panel.T, rng));

    Algo8Choice ch = algo8_choice(state, edge, std::move(aux));
    std::size_t pick = rng.categorical_from_logits(ch.logweights);

    if (pick < ch.groups.size()) {
        int g = ch.groups[pick];
        state.partition.assign(edge, g);
        detail::stats_add_edge(panel, state, g, edge);
    } else {
        int g = state.partition.assign_new_group(edge);
        state.paths.resize(state.partition.n_groups());
        state.stats.resize(state.partition.n_groups());
        state.paths[g] = std::move(ch.aux_paths[pick - ch.groups.size()]);
        detail::stats_add_edge(panel, state, g, edge);
    }
}

// ---------------------------------------------------------------------------
// Transition matrix
// ---------------------------------------------------------------------------

/// Conjugate Dirichlet draw of theta given state paths; counts include the
/// virtual s^(0)=0 start of every path.
inline TransitionMatrix sample_transition_matrix(const std::vector<GroupStatePath>& paths,
                                                 const std::vector<std::vector<double>>& dirichlet_rows,
                                                 RngStream& rng) {
    const int K = static_cast<int>(dirichlet_rows.size());
    auto counts = transition_counts_with_virtual_start(paths, K);
    TransitionMatrix theta(K);
    for (int s = 0; s < K; ++s) {
        std::vector<double> post(K);
        for (int k = 0; k < K; ++k)
            post[k] = dirichlet_rows[s][k] + static_cast<double>(counts[s][k]);
        theta[s] = rng.dirichlet(post);
    }
    return theta;
}

inline void sample_transition_matrix(ChainState& state, RngStream& rng) {
    std::vector<GroupStatePath> active;
    for (int g = 0; g < state.partition.n_groups(); ++g)
        if (state.partition.occupancy(g) >= 1) active.push_back(state.paths[g]);
    state.theta = sample_transition_matrix(active, state.hypers.dirichlet_rows, rng);
}

// ---------------------------------------------------------------------------
// Forward-filtering backward-sampling
// ---------------------------------------------------------------------------

/// Exact joint draw of one group's state path.  Emissions use the collapsed
/// group-time likelihood with the state-independent member factors dropped.
inline GroupStatePath ffbs_state_path(const ChainState& state, int group, RngStream& rng) {
    const auto& panel = *state.panel;
    const int K = state.hypers.K;
    const GroupStats& st = state.stats[group];
    if (st.members.empty()) throw std::invalid_argument("ffbs: empty group");

    std::vector<std::vector<double>> log_theta(K, std::vector<double>(K));
    for (int s = 0; s < K; ++s)
        for (int k = 0; k < K; ++k) log_theta[s][k] = std::log(state.theta[s][k]);

    // Forward pass in log space with per-step normalization.
    std::vector<std::vector<double>> fwd(panel.T, std::vector<double>(K));
    std::vector<double> em(K);
    for (std::int64_t t = 0; t < panel.T; ++t) {
        for (int s = 0; s < K; ++s)
            em[s] = emission_loglik(state.hypers.emissions[s], st.sum_y[t], st.sum_lambda);
        for (int s = 0; s < K; ++s) {
            double acc;
            if (t == 0) {
                acc = log_theta[0][s];
            } else {
                double m = -std::numeric_limits<double>::infinity();
                for (int p = 0; p < K; ++p)
                    m = std::max(m, fwd[t - 1][p] + log_theta[p][s]);
                double sum = 0;
                for (int p = 0; p < K; ++p)
                    sum += std::exp(fwd[t - 1][p] + log_theta[p][s] - m);
                acc = m + std::log(sum);
            }
            fwd[t][s] = acc + em[s];
        }
        double m = *std::max_element(fwd[t].begin(), fwd[t].end());
        if (!std::isfinite(m))
            throw std::runtime_error("ffbs: numerical underflow at t=" + std::to_string(t));
        for (int s = 0; s < K; ++s) fwd[t][s] -= m;
    }

    GroupStatePath path;
    path.states.resize(panel.T);
    path.states[panel.T - 1] =
        static_cast<int>(rng.categorical_from_logits(fwd[panel.T - 1]));
    for (std::int64_t t = panel.T - 2; t >= 0; --t) {
        std::vector<double> logits(K);
        for (int s = 0; s < K; ++s)
            logits[s] = fwd[t][s] + log_theta[s][path.states[t + 1]];
        path.states[t] = static_cast<int>(rng.categorical_from_logits(logits));
    }
    return path;
}

// ---------------------------------------------------------------------------
// Deviation factors
// ---------------------------------------------------------------------------

/// Closed-form conditional posterior means c' * d' of a group's deviation
/// factors under its current path.
inline std::vector<double> posterior_mean_deviations(const ChainState& state, int group) {
    const auto& panel = *state.panel;
    const GroupStats& st = state.stats[group];
    if (st.members.empty()) throw std::invalid_argument("deviations: empty group");
    std::vector<double> mean(panel.T);
    for (std::int64_t t = 0; t < panel.T; ++t) {
        const auto& em = state.hypers.emissions[state.paths[group].states[t]];
        auto s = suff_stats_from_sums(em, st.sum_y[t], st.sum_lambda);
        mean[t] = s.c_prime * s.d_prime;
    }
    return mean;
}

/// Draws delta_g^(t) ~ Gamma(c', d') for each time slice.
inline std::vector<double> sample_deviation_factors(const ChainState& state, int group,
                                                    RngStream& rng) {
    const auto& panel = *state.panel;
    const GroupStats& st = state.stats[group];
    if (st.members.empty()) throw std::invalid_argument("deviations: empty group");
    std::vector<double> draws(panel.T);
    for (std::int64_t t = 0; t < panel.T; ++t) {
        const auto& em = state.hypers.emissions[state.paths[group].states[t]];
        auto s = suff_stats_from_sums(em, st.sum_y[t], st.sum_lambda);
        draws[t] = rng.gamma(s.c_prime, s.d_prime);
    }
    return draws;
}

// ---------------------------------------------------------------------------
// Full sweep
// ---------------------------------------------------------------------------

/// One MCMC iteration in the pinned scan order: all base rates, then
/// (gamma1, gamma2), then all assignments, then theta, then all state paths.
/// Leaves the partition canonical.
inline void sweep(ChainState& state, const SliceConfig& slice_cfg, const Algo8Config& algo8_cfg,
                  RngStream& rng, SliceDiagnostics* diag = nullptr) {
    const std::size_t E = state.panel->n_edges();
    for (std::size_t e = 0; e < E; ++e)
        slice_sample_base_rate(state, static_cast<int>(e), slice_cfg, rng, diag);
    slice_sample_gamma_hypers(state, slice_cfg, rng, diag);
    for (std::size_t e = 0; e < E; ++e)
        gibbs_group_assignment(state, static_cast<int>(e), algo8_cfg, rng);
    state.canonicalize();
    sample_transition_matrix(state, rng);
    for (int g = 0; g < state.partition.n_groups(); ++g)
        state.paths[g] = ffbs_state_path(state, g, rng);
}

}  // namespace mrel
