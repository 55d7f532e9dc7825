#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mrel/model.hpp"
#include "mrel/panel.hpp"
#include "mrel/samplers.hpp"

namespace mrel {

struct RunConfig {
    int n_chains = 1;
    std::int64_t n_iterations = 5000;
    std::int64_t burn_in = 1000;
    std::int64_t thin = 10;
    std::uint64_t seed = 0;
    HyperParams hypers;
    SliceConfig slice;
    Algo8Config algo8;
    std::int64_t checkpoint_every = 0;  // 0 disables periodic checkpoints
    int workers = 1;

    void validate() const {
        if (n_chains < 1) throw std::invalid_argument("config: n_chains >= 1 required");
        if (n_iterations < 1) throw std::invalid_argument("config: n_iterations >= 1 required");
        if (burn_in < 0 || burn_in >= n_iterations)
            throw std::invalid_argument("config: need 0 <= burn_in < n_iterations");
        if (thin < 1) throw std::invalid_argument("config: thin >= 1 required");
        hypers.validate();
    }
};

struct SampleRecord {
    std::int64_t iteration = 0;  // 1-based
    int chain = 0;
    double joint_logprob = 0;
    Partition partition;
    std::vector<GroupStatePath> paths;
    std::vector<double> base_rates;
    TransitionMatrix theta;
    double gamma_shape = 0, gamma_scale = 0;
};

// ---------------------------------------------------------------------------
// Trace persistence (see docs/formats.md)
// ---------------------------------------------------------------------------

/// One line per record: iteration, chain, joint_logprob, G, partition vector.
inline std::string trace_line(const SampleRecord& rec) {
    std::ostringstream os;
    os.precision(17);
    os << rec.iteration << "\t" << rec.chain << "\t" << rec.joint_logprob << "\t"
       << rec.partition.n_groups() << "\t";
    const auto& z = rec.partition.labels();
    for (std::size_t e = 0; e < z.size(); ++e) {
        if (e) os << ",";
        os << z[e];
    }
    return os.str();
}

inline constexpr const char* kTraceHeader = "iteration\tchain\tjoint_logprob\tn_groups\tpartition";

// ---------------------------------------------------------------------------
// Chain initialization
// ---------------------------------------------------------------------------

/// Deterministic initialization: one group, all-spike path, lambda from the
/// per-edge count mean, theta at the prior row means, (gamma1, gamma2) by
/// method of moments on the initial lambdas.
inline ChainState init_chain_state(const EdgeCountPanel& panel, const HyperParams& hypers) {
    ChainState state;
    state.panel = &panel;
    state.hypers = hypers;
    state.partition = Partition::single_group(panel.n_edges());
    state.paths.assign(1, GroupStatePath{std::vector<int>(panel.T, 0)});
    state.base_rates.resize(panel.n_edges());
    for (std::size_t e = 0; e < panel.n_edges(); ++e) {
        double mean = 0;
        for (auto y : panel.counts[e]) mean += static_cast<double>(y);
        mean /= static_cast<double>(panel.T);
        state.base_rates[e] = std::max(mean, 0.01);
    }
    state.theta.resize(hypers.K);
    for (int s = 0; s < hypers.K; ++s) {
        double sum = 0;
        for (double b : hypers.dirichlet_rows[s]) sum += b;
        state.theta[s].resize(hypers.K);
        for (int k = 0; k < hypers.K; ++k) state.theta[s][k] = hypers.dirichlet_rows[s][k] / sum;
    }
    double m = 0, v = 0;
    for (double l : state.base_rates) m += l;
    m /= static_cast<double>(state.base_rates.size());
    for (double l : state.base_rates) v += (l - m) * (l - m);
    v /= static_cast<double>(state.base_rates.size());
    v = std::max(v, 1e-12);
    state.gamma_shape = std::clamp(m * m / v, kGammaHyperLo, kGammaHyperHi);
    state.gamma_scale = std::clamp(v / m, kGammaHyperLo, kGammaHyperHi);
    state.rebuild_stats();
    return state;
}

// ---------------------------------------------------------------------------
// Checkpointing: versioned binary with an embedded FNV-1a digest
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct ByteWriter {
    std::string buf;
    void u64(std::uint64_t v) { buf.append(reinterpret_cast<const char*>(&v), 8); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { buf.append(reinterpret_cast<const char*>(&v), 8); }
    void str(const std::string& s) {
        u64(s.size());
        buf.append(s);
    }
    void f64v(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    void i32v(const std::vector<int>& v) {
        u64(v.size());
        for (int x : v) i64(x);
    }
};

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;
    explicit ByteReader(const std::string& b) : buf(b) {}
    void need(std::size_t n) {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated");
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string str() {
        std::size_t n = u64();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    std::vector<double> f64v() {
        std::size_t n = u64();
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    std::vector<int> i32v() {
        std::size_t n = u64();
        std::vector<int> v(n);
        for (auto& x : v) x = static_cast<int>(i64());
        return v;
    }
};

inline void write_record(ByteWriter& w, const SampleRecord& rec) {
    w.i64(rec.iteration);
    w.i64(rec.chain);
    w.f64(rec.joint_logprob);
    w.i32v(rec.partition.labels());
    w.u64(rec.paths.size());
    for (const auto& p : rec.paths) w.i32v(p.states);
    w.f64v(rec.base_rates);
    w.u64(rec.theta.size());
    for (const auto& row : rec.theta) w.f64v(row);
    w.f64(rec.gamma_shape);
    w.f64(rec.gamma_scale);
}

inline SampleRecord read_record(ByteReader& r) {
    SampleRecord rec;
    rec.iteration = r.i64();
    rec.chain = static_cast<int>(r.i64());
    rec.joint_logprob = r.f64();
    rec.partition = Partition::from_labels(r.i32v());
    std::size_t n_paths = r.u64();
    for (std::size_t i = 0; i < n_paths; ++i) rec.paths.push_back(GroupStatePath{r.i32v()});
    rec.base_rates = r.f64v();
    std::size_t n_rows = r.u64();
    for (std::size_t i = 0; i < n_rows; ++i) rec.theta.push_back(r.f64v());
    rec.gamma_shape = r.f64();
    rec.gamma_scale = r.f64();
    return rec;
}

}  // namespace detail

struct Checkpoint {
    int chain = 0;
    std::int64_t next_iteration = 0;  // 0-based sweep index to execute next
    std::int64_t n_emitted = 0;       // trace records written so far
    ChainState state;                 // panel pointer not persisted
    std::string rng_state;
    SliceDiagnostics diag;
    bool has_best = false;
    SampleRecord best;
};

inline constexpr const char* kCheckpointMagic = "MRELCKPT1\n";

inline void write_checkpoint_file(const std::string& path, const Checkpoint& ck) {
    detail::ByteWriter w;
    w.i64(ck.chain);
    w.i64(ck.next_iteration);
    w.i64(ck.n_emitted);
    w.f64(ck.state.gamma_shape);
    w.f64(ck.state.gamma_scale);
    w.i32v(ck.state.partition.labels());
    w.u64(ck.state.paths.size());
    for (const auto& p : ck.state.paths) w.i32v(p.states);
    w.f64v(ck.state.base_rates);
    w.u64(ck.state.theta.size());
    for (const auto& row : ck.state.theta) w.f64v(row);
    w.str(ck.rng_state);
    w.i64(ck.diag.shrink_exhausted);
    w.u64(ck.has_best ? 1 : 0);
    if (ck.has_best) detail::write_record(w, ck.best);

    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp);
        os << kCheckpointMagic;
        std::uint64_t n = w.buf.size(), digest = detail::fnv1a(w.buf);
        os.write(reinterpret_cast<const char*>(&n), 8);
        os.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
        os.write(reinterpret_cast<const char*>(&digest), 8);
        if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("checkpoint: cannot rename " + tmp);
}

/// Loads a checkpoint; the caller must re-attach the panel and call
/// rebuild_stats() (done by run_chain on resume).
inline Checkpoint read_checkpoint_file(const std::string& path, const HyperParams& hypers) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string magic(std::string(kCheckpointMagic).size(), '\0');
    is.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (magic != kCheckpointMagic) throw std::runtime_error("checkpoint: bad magic");
    std::uint64_t n = 0;
    is.read(reinterpret_cast<char*>(&n), 8);
    std::string payload(n, '\0');
    is.read(payload.data(), static_cast<std::streamsize>(n));
    std::uint64_t digest = 0;
    is.read(reinterpret_cast<char*>(&digest), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
    if (detail::fnv1a(payload) != digest)
        throw std::runtime_error("checkpoint: digest mismatch in " + path);

    detail::ByteReader r(payload);
    Checkpoint ck;
    ck.chain = static_cast<int>(r.i64());
    ck.next_iteration = r.i64();
    ck.n_emitted = r.i64();
    ck.state.hypers = hypers;
    ck.state.gamma_shape = r.f64();
    ck.state.gamma_scale = r.f64();
    ck.state.partition = Partition::from_labels(r.i32v());
    std::size_t n_paths = r.u64();
    for (std::size_t i = 0; i < n_paths; ++i)
        ck.state.paths.push_back(GroupStatePath{r.i32v()});
    ck.state.base_rates = r.f64v();
    std::size_t n_rows = r.u64();
    for (std::size_t i = 0; i < n_rows; ++i) ck.state.theta.push_back(r.f64v());
    ck.rng_state = r.str();
    ck.diag.shrink_exhausted = r.i64();
    ck.has_best = r.u64() != 0;
    if (ck.has_best) ck.best = detail::read_record(r);
    return ck;
}

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

struct ChainResult {
    bool has_best = false;
    SampleRecord best;  // maximum joint_logprob over all post-burn-in sweeps
    std::int64_t n_emitted = 0;
    SliceDiagnostics diag;
};

using SampleCallback = std::function<void(const SampleRecord&)>;

struct ChainRunOptions {
    std::string checkpoint_path;  // empty disables checkpointing
    bool resume = false;          // continue from checkpoint_path if it exists
};

inline SampleRecord make_record(const ChainState& state, std::int64_t iteration, int chain,
                                double jl) {
    SampleRecord rec;
    rec.iteration = iteration;
    rec.chain = chain;
    rec.joint_logprob = jl;
    rec.partition = state.partition;
    rec.paths = state.paths;
    rec.base_rates = state.base_rates;
    rec.theta = state.theta;
    rec.gamma_shape = state.gamma_shape;
    rec.gamma_scale = state.gamma_scale;
    return rec;
}

/// Runs one chain: n_iterations sweeps in the pinned scan order, emitting a
/// record every `thin` sweeps after burn-in and tracking the best post-burn-in
/// sample.  With options.resume and an existing checkpoint, continues exactly
/// where the checkpoint left off (bit-identical to an uninterrupted run).
inline ChainResult run_chain(const EdgeCountPanel& panel, const RunConfig& cfg, int chain,
                             const SampleCallback& on_sample,
                             const ChainRunOptions& options = {}) {
    cfg.validate();
    panel.validate();

    ChainState state;
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(chain));
    ChainResult result;
    std::int64_t start = 0;

    if (options.resume && !options.checkpoint_path.empty() &&
        std::filesystem::exists(options.checkpoint_path)) {
        Checkpoint ck = read_checkpoint_file(options.checkpoint_path, cfg.hypers);
        if (ck.chain != chain) throw std::runtime_error("checkpoint: chain index mismatch");
        state = std::move(ck.state);
        state.panel = &panel;
        state.rebuild_stats();
        rng.load_state(ck.rng_state);
        start = ck.next_iteration;
        result.n_emitted = ck.n_emitted;
        result.has_best = ck.has_best;
        result.best = std::move(ck.best);
        result.diag = ck.diag;
    } else {
        state = init_chain_state(panel, cfg.hypers);
    }

    auto checkpoint = [&](std::int64_t next_iter) {
        if (options.checkpoint_path.empty()) return;
        Checkpoint ck;
        ck.chain = chain;
        ck.next_iteration = next_iter;
        ck.n_emitted = result.n_emitted;
        ck.state = state;
        ck.state.panel = nullptr;
        ck.state.stats.clear();
        ck.rng_state = rng.save_state();
        ck.diag = result.diag;
        ck.has_best = result.has_best;
        ck.best = result.best;
        write_checkpoint_file(options.checkpoint_path, ck);
    };

    for (std::int64_t iter = start; iter < cfg.n_iterations; ++iter) {
        try {
            sweep(state, cfg.slice, cfg.algo8, rng, &result.diag);
        } catch (const std::exception& ex) {
            throw std::runtime_error("chain " + std::to_string(chain) + " iteration " +
                                     std::to_string(iter + 1) + ": " + ex.what());
        }
#ifndef NDEBUG
        state.partition.validate();
#endif
        if (iter >= cfg.burn_in) {
            double jl = state.joint_logprob();
            if (!result.has_best || jl > result.best.joint_logprob) {
                result.best = make_record(state, iter + 1, chain, jl);
                result.has_best = true;
            }
            if ((iter - cfg.burn_in) % cfg.thin == 0) {
                on_sample(make_record(state, iter + 1, chain, jl));
                ++result.n_emitted;
            }
        }
        if (cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0)
            checkpoint(iter + 1);
    }
    checkpoint(cfg.n_iterations);
    return result;
}

/// Record with maximal joint_logprob; ties broken by (chain, iteration).
inline SampleRecord select_map(const std::vector<SampleRecord>& records) {
    if (records.empty()) throw std::invalid_argument("select_map: no records");
    const SampleRecord* best = &records[0];
    for (const auto& rec : records) {
        if (rec.joint_logprob > best->joint_logprob ||
            (rec.joint_logprob == best->joint_logprob &&
             std::pair{rec.chain, rec.iteration} < std::pair{best->chain, best->iteration}))
            best = &rec;
    }
    return *best;
}

/// Runs cfg.n_chains chains (up to cfg.workers concurrently) and returns the
/// per-chain results; the overall MAP is select_map over the per-chain bests.
inline std::vector<ChainResult> run_chains(
    const EdgeCountPanel& panel, const RunConfig& cfg,
    const std::function<void(int, const SampleRecord&)>& on_sample,
    const std::string& checkpoint_dir = "", bool resume = false) {
    cfg.validate();
    std::vector<ChainResult> results(cfg.n_chains);
    std::vector<std::exception_ptr> errors(cfg.n_chains);
    int workers = std::max(1, cfg.workers);

    std::vector<std::thread> pool;
    std::mutex next_mutex;
    int next_chain = 0;
    auto worker = [&]() {
        for (;;) {
            int chain;
            {
                std::lock_guard lock(next_mutex);
                if (next_chain >= cfg.n_chains) return;
                chain = next_chain++;
            }
            try {
                ChainRunOptions opts;
                if (!checkpoint_dir.empty())
                    opts.checkpoint_path = checkpoint_dir + "/chain_" +
                                           std::to_string(chain) + ".ckpt";
                opts.resume = resume;
                results[chain] = run_chain(
                    panel, cfg, chain,
                    [&, chain](const SampleRecord& rec) { on_sample(chain, rec); }, opts);
            } catch (...) {
                errors[chain] = std::current_exception();
            }
        }
    };
    for (int w = 0; w < std::min(workers, cfg.n_chains); ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    return results;
}

// ---------------------------------------------------------------------------
// Posterior group reports
// ---------------------------------------------------------------------------

struct GroupReport {
    int group = 0;
    std::vector<int> member_edges;
    std::vector<std::string> member_labels;  // "SRC->DST" with display names
    std::vector<double> mean_deviation;      // c' * d' per time slice
    std::vector<double> deviation_sd;        // empty unless n_delta_draws > 0
    std::vector<int> states;                 // MAP path
    std::vector<std::vector<std::int64_t>> member_counts;
};

/// Per-group posterior report under the MAP sample, sorted by descending group
/// size (ties by group label).
inline std::vector<GroupReport> posterior_group_report(const SampleRecord& map_sample,
                                                       const EdgeCountPanel& panel,
                                                       const HyperParams& hypers,
                                                       int n_delta_draws = 0,
                                                       std::uint64_t seed = 0) {
    ChainState state;
    state.panel = &panel;
    state.hypers = hypers;
    state.gamma_shape = map_sample.gamma_shape;
    state.gamma_scale = map_sample.gamma_scale;
    state.partition = map_sample.partition;
    state.paths = map_sample.paths;
    state.base_rates = map_sample.base_rates;
    state.theta = map_sample.theta;
    state.rebuild_stats();

    auto display = [&](const Edge& e) {
        auto name = [&](const std::string& code) {
            auto it = panel.actor_names.find(code);
            return it == panel.actor_names.end() ? code : it->second;
        };
        return name(e.src) + "->" + name(e.dst);
    };

    std::vector<int> order(state.partition.n_groups());
    for (int g = 0; g < state.partition.n_groups(); ++g) order[g] = g;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return state.partition.occupancy(a) > state.partition.occupancy(b);
    });

    RngStream rng(seed, 0xdead);
    std::vector<GroupReport> reports;
    for (int g : order) {
        GroupReport rep;
        rep.group = g;
        rep.member_edges = state.partition.members(g);
        for (int e : rep.member_edges) {
            rep.member_labels.push_back(display(panel.edges[e]));
            rep.member_counts.push_back(panel.counts[e]);
        }
        rep.mean_deviation = posterior_mean_deviations(state, g);
        rep.states = state.paths[g].states;
        if (n_delta_draws > 0) {
            std::vector<double> m(panel.T, 0), m2(panel.T, 0);
            for (int d = 0; d < n_delta_draws; ++d) {
                auto draw = sample_deviation_factors(state, g, rng);
                for (std::int64_t t = 0; t < panel.T; ++t) {
                    m[t] += draw[t];
                    m2[t] += draw[t] * draw[t];
                }
            }
            rep.deviation_sd.resize(panel.T);
            for (std::int64_t t = 0; t < panel.T; ++t) {
                double mean = m[t] / n_delta_draws;
                rep.deviation_sd[t] = std::sqrt(std::max(0.0, m2[t] / n_delta_draws - mean * mean));
            }
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

// ---------------------------------------------------------------------------
// MAP summary serialization (JSON)
// ---------------------------------------------------------------------------

inline nlohmann::json record_to_json(const SampleRecord& rec) {
    nlohmann::json j;
    j["format"] = "mrel-map-summary v1";
    j["iteration"] = rec.iteration;
    j["chain"] = rec.chain;
    j["joint_logprob"] = rec.joint_logprob;
    j["gamma_shape"] = rec.gamma_shape;
    j["gamma_scale"] = rec.gamma_scale;
    j["partition"] = rec.partition.labels();
    std::vector<std::vector<int>> paths;
    for (const auto& p : rec.paths) paths.push_back(p.states);
    j["paths"] = paths;
    j["base_rates"] = rec.base_rates;
    j["theta"] = rec.theta;
    return j;
}

inline SampleRecord record_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "mrel-map-summary v1")
        throw std::runtime_error("map summary: bad format tag");
    SampleRecord rec;
    rec.iteration = j.at("iteration").get<std::int64_t>();
    rec.chain = j.at("chain").get<int>();
    rec.joint_logprob = j.at("joint_logprob").get<double>();
    rec.gamma_shape = j.at("gamma_shape").get<double>();
    rec.gamma_scale = j.at("gamma_scale").get<double>();
    rec.partition = Partition::from_labels(j.at("partition").get<std::vector<int>>());
    for (const auto& states : j.at("paths"))
        rec.paths.push_back(GroupStatePath{states.get<std::vector<int>>()});
    rec.base_rates = j.at("base_rates").get<std::vector<double>>();
    rec.theta = j.at("theta").get<TransitionMatrix>();
    return rec;
}

}  // namespace mrel
