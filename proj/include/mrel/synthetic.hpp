#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrel/hypers.hpp"
#include "mrel/model.hpp"
#include "mrel/panel.hpp"
#include "mrel/partition.hpp"
#include "mrel/rng.hpp"
#include "mrel/samplers.hpp"

namespace mrel {

/// A complete forward draw from the generative model, with the sampled latents
/// recorded alongside the observed panel.
struct GroundTruth {
    EdgeCountPanel panel;
    Partition partition;
    std::vector<double> base_rates;
    std::vector<GroupStatePath> paths;        // per group
    std::vector<std::vector<double>> deviations;  // per group, per time
    TransitionMatrix theta;
};

/// Forward-samples a dataset: Z ~ CRP(alpha), lambda ~ Gamma(g1,g2),
/// theta rows ~ Dirichlet(beta_s), paths from the chain with s^(0)=0,
/// delta ~ Gamma(c_s,d_s), y ~ Poisson(lambda * delta).
inline GroundTruth generate(std::int64_t n_edges, std::int64_t T,
                            const HyperParams& hypers, RngStream& rng) {
    if (n_edges < 1 || T < 1)
        throw std::invalid_argument("generate: need n_edges >= 1 and T >= 1");
    hypers.validate();
    GroundTruth truth;

    // CRP partition, sequential seating.
    std::vector<int> labels(n_edges);
    std::vector<double> occ;
    for (std::int64_t e = 0; e < n_edges; ++e) {
        std::vector<double> w = occ;
        w.push_back(hypers.alpha);
        std::size_t pick = rng.categorical(w);
        if (pick == occ.size()) occ.push_back(1.0);
        else occ[pick] += 1.0;
        labels[e] = static_cast<int>(pick);
    }
    truth.partition = Partition::from_labels(labels);
    const int G = truth.partition.n_groups();

    truth.base_rates.resize(n_edges);
    for (std::int64_t e = 0; e < n_edges; ++e)
        truth.base_rates[e] = rng.gamma(hypers.gamma_shape, hypers.gamma_scale);

    truth.theta.resize(hypers.K);
    for (int s = 0; s < hypers.K; ++s)
        truth.theta[s] = rng.dirichlet(hypers.dirichlet_rows[s]);

    truth.paths.resize(G);
    truth.deviations.assign(G, std::vector<double>(T));
    for (int g = 0; g < G; ++g) {
        truth.paths[g] = sample_path_from_prior(truth.theta, T, rng);
        for (std::int64_t t = 0; t < T; ++t) {
            const auto& em = hypers.emissions[truth.paths[g].states[t]];
            truth.deviations[g][t] = rng.gamma(em.shape, em.scale);
        }
    }

    // Directed actor pairs, enumerated lexicographically.
    std::int64_t n_actors = 2;
    while (n_actors * (n_actors - 1) < n_edges) ++n_actors;
    auto actor = [](std::int64_t i) { return "a" + std::to_string(i); };
    truth.panel.T = T;
    truth.panel.bin_spec = "synthetic";
    std::int64_t made = 0;
    for (std::int64_t i = 0; i < n_actors && made < n_edges; ++i)
        for (std::int64_t j = 0; j < n_actors && made < n_edges; ++j) {
            if (i == j) continue;
            truth.panel.edges.push_back({actor(i), actor(j)});
            ++made;
        }
    truth.panel.counts.assign(n_edges, std::vector<std::int64_t>(T));
    for (std::int64_t e = 0; e < n_edges; ++e) {
        int g = truth.partition.group_of(e);
        for (std::int64_t t = 0; t < T; ++t)
            truth.panel.counts[e][t] =
                rng.poisson(truth.base_rates[e] * truth.deviations[g][t]);
    }
    truth.panel.validate();
    return truth;
}

// ---------------------------------------------------------------------------
// Recovery metrics
// ---------------------------------------------------------------------------

/// Mean relative absolute error of base rates: avg |est - true| / true.
inline double base_rate_error(const std::vector<double>& truth,
                              const std::vector<double>& estimate) {
    if (truth.size() != estimate.size() || truth.empty())
        throw std::invalid_argument("base_rate_error: size mismatch");
    double acc = 0;
    for (std::size_t e = 0; e < truth.size(); ++e)
        acc += std::abs(estimate[e] - truth[e]) / truth[e];
    return acc / static_cast<double>(truth.size());
}

/// Edge-level state disagreement rate: for each edge and time, compare the
/// state of its true group against the state of its inferred group.
inline double state_error(const Partition& true_partition,
                          const std::vector<GroupStatePath>& true_paths,
                          const Partition& est_partition,
                          const std::vector<GroupStatePath>& est_paths) {
    const std::size_t E = true_partition.n_edges();
    if (est_partition.n_edges() != E || E == 0)
        throw std::invalid_argument("state_error: edge set mismatch");
    std::int64_t disagree = 0, total = 0;
    for (std::size_t e = 0; e < E; ++e) {
        const auto& ts = true_paths[true_partition.group_of(e)].states;
        const auto& es = est_paths[est_partition.group_of(e)].states;
        if (ts.size() != es.size()) throw std::invalid_argument("state_error: T mismatch");
        for (std::size_t t = 0; t < ts.size(); ++t) {
            disagree += (ts[t] != es[t]) ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(disagree) / static_cast<double>(total);
}

/// Variation of information between two partitions of the same edge set,
/// natural log: H(p1) + H(p2) - 2 I(p1; p2).
inline double variation_of_information(const Partition& p1, const Partition& p2) {
    const std::size_t n = p1.n_edges();
    if (p2.n_edges() != n || n == 0)
        throw std::invalid_argument("variation_of_information: edge set mismatch");
    std::map<std::pair<int, int>, std::int64_t> joint;
    for (std::size_t e = 0; e < n; ++e)
        ++joint[{p1.group_of(e), p2.group_of(e)}];
    const double N = static_cast<double>(n);
    double h1 = 0, h2 = 0, mi = 0;
    for (int g = 0; g < p1.n_groups(); ++g) {
        double p = p1.occupancy(g) / N;
        h1 -= p * std::log(p);
    }
    for (int g = 0; g < p2.n_groups(); ++g) {
        double p = p2.occupancy(g) / N;
        h2 -= p * std::log(p);
    }
    for (const auto& [cell, c] : joint) {
        double pxy = static_cast<double>(c) / N;
        double px = p1.occupancy(cell.first) / N;
        double py = p2.occupancy(cell.second) / N;
        mi += pxy * std::log(pxy / (px * py));
    }
    double vi = h1 + h2 - 2.0 * mi;
    return vi < 0 ? 0 : vi;  // clamp tiny negative rounding
}

// ---------------------------------------------------------------------------
// Truth sidecar serialization
// ---------------------------------------------------------------------------

inline nlohmann::json truth_to_json(const GroundTruth& truth) {
    nlohmann::json j;
    j["format"] = "mrel-truth v1";
    j["partition"] = truth.partition.labels();
    j["base_rates"] = truth.base_rates;
    j["theta"] = truth.theta;
    j["deviations"] = truth.deviations;
    std::vector<std::vector<int>> paths;
    for (const auto& p : truth.paths) paths.push_back(p.states);
    j["paths"] = paths;
    return j;
}

/// Reads latents back; the panel itself lives in the companion panel file.
inline GroundTruth truth_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "mrel-truth v1")
        throw std::runtime_error("truth sidecar: bad format tag");
    GroundTruth truth;
    truth.partition = Partition::from_labels(j.at("partition").get<std::vector<int>>());
    truth.base_rates = j.at("base_rates").get<std::vector<double>>();
    truth.theta = j.at("theta").get<TransitionMatrix>();
    truth.deviations = j.at("deviations").get<std::vector<std::vector<double>>>();
    for (const auto& states : j.at("paths"))
        truth.paths.push_back(GroupStatePath{states.get<std::vector<int>>()});
    return truth;
}

inline void write_truth_file(const std::string& path, const GroundTruth& truth) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw std::runtime_error("cannot open " + tmp);
        os << truth_to_json(truth).dump(2) << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp);
}

inline GroundTruth read_truth_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    is >> j;
    return truth_from_json(j);
}

}  // namespace mrel
