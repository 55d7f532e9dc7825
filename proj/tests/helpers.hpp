#pragma once

#include <string>
#include <vector>

#include "mrel/engine.hpp"
#include "mrel/samplers.hpp"

namespace testing_helpers {

inline mrel::EdgeCountPanel make_panel(const std::vector<std::vector<std::int64_t>>& counts) {
    mrel::EdgeCountPanel panel;
    panel.T = static_cast<std::int64_t>(counts.at(0).size());
    for (std::size_t e = 0; e < counts.size(); ++e) {
        panel.edges.push_back({"a" + std::to_string(e), "b" + std::to_string(e)});
        panel.counts.push_back(counts[e]);
    }
    panel.validate();
    return panel;
}

inline mrel::ChainState make_state(const mrel::EdgeCountPanel& panel,
                                   const mrel::HyperParams& hypers,
                                   const std::vector<int>& labels,
                                   const std::vector<std::vector<int>>& paths,
                                   const std::vector<double>& base_rates,
                                   const mrel::TransitionMatrix& theta) {
    mrel::ChainState state;
    state.panel = &panel;
    state.hypers = hypers;
    state.gamma_shape = hypers.gamma_shape;
    state.gamma_scale = hypers.gamma_scale;
    state.partition = mrel::Partition::from_labels(labels);
    for (const auto& p : paths) state.paths.push_back(mrel::GroupStatePath{p});
    state.base_rates = base_rates;
    state.theta = theta;
    state.rebuild_stats();
    return state;
}

inline mrel::HyperParams two_state_hypers() {
    mrel::HyperParams h;
    h.alpha = 1.0;
    h.gamma_shape = 2.0;
    h.gamma_scale = 5.0;
    h.K = 2;
    h.emissions = {{1000.0, 0.0001}, {4.0, 1.0}};
    h.dirichlet_rows = {{800.0, 80.0}, {200.0, 600.0}};
    return h;
}

}  // namespace testing_helpers
