// mrel: infer latent edge groups in a temporal interaction network from
// correlated anomalous deviations in interaction counts.
//
// Subcommands: generate, ingest, fit, report, recover.  See README.md and
// docs/formats.md for file formats.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrel/engine.hpp"
#include "mrel/hypers.hpp"
#include "mrel/ingest.hpp"
#include "mrel/model.hpp"
#include "mrel/panel.hpp"
#include "mrel/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + tmp);
        os << text;
        if (!os) throw std::runtime_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

mrel::GammaEmission emission_from_json(const json& j) {
    if (j.contains("shape") && j.contains("scale"))
        return {j.at("shape").get<double>(), j.at("scale").get<double>()};
    if (j.contains("mean") && j.contains("variance"))
        return mrel::GammaEmission::from_mean_variance(j.at("mean").get<double>(),
                                                       j.at("variance").get<double>());
    throw std::runtime_error("emission needs shape/scale or mean/variance");
}

mrel::HyperParams hypers_from_json(const json& j) {
    mrel::HyperParams h;
    h.alpha = j.at("alpha").get<double>();
    h.gamma_shape = j.at("gamma_shape").get<double>();
    h.gamma_scale = j.at("gamma_scale").get<double>();
    h.K = j.at("K").get<int>();
    for (const auto& em : j.at("emissions")) h.emissions.push_back(emission_from_json(em));
    h.dirichlet_rows = j.at("dirichlet_rows").get<std::vector<std::vector<double>>>();
    h.validate();
    return h;
}

struct HyperChoice {
    std::string profile = "synthetic-2013";
    std::string hypers_file;
    double alpha_override = -1;

    mrel::HyperParams resolve() const {
        mrel::HyperParams h;
        if (!hypers_file.empty()) {
            std::ifstream is(hypers_file);
            if (!is) throw std::runtime_error("cannot open hypers file " + hypers_file);
            json j;
            is >> j;
            h = hypers_from_json(j);
        } else if (profile == "synthetic-2013") {
            h = mrel::synthetic_2013_hypers();
        } else if (profile == "gdelt-2013") {
            h = mrel::gdelt_2013_hypers();
        } else {
            throw CLI::ValidationError("--profile", "unknown profile " + profile);
        }
        if (alpha_override > 0) h.alpha = alpha_override;
        for (const auto& warning : h.lint())
            std::cerr << "hypers lint: " << warning << "\n";
        return h;
    }

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--profile", profile,
                        "named hyperparameter profile (synthetic-2013 or gdelt-2013)")
            ->capture_default_str();
        cmd->add_option("--hypers", hypers_file, "JSON hyperparameter file (overrides --profile)");
        cmd->add_option("--alpha", alpha_override, "override the CRP concentration");
    }
};

struct FitFlags {
    std::string panel_path;
    mrel::RunConfig cfg;
    bool resume = false;
    HyperChoice hypers;

    void add_flags(CLI::App* cmd, std::uint64_t* seed, int* workers) {
        cmd->add_option("--panel", panel_path, "input panel file")->required();
        cmd->add_option("--chains", cfg.n_chains, "number of independent chains")
            ->capture_default_str();
        cmd->add_option("--iters", cfg.n_iterations, "sampling iterations per chain")
            ->capture_default_str();
        cmd->add_option("--burn-in", cfg.burn_in, "iterations discarded before recording")
            ->capture_default_str();
        cmd->add_option("--thin", cfg.thin, "record every Nth post-burn-in iteration")
            ->capture_default_str();
        cmd->add_option("--checkpoint-every", cfg.checkpoint_every,
                        "write a resumable checkpoint every N iterations (0 = only at end)")
            ->capture_default_str();
        cmd->add_flag("--resume", resume, "continue from checkpoints in --out-dir");
        cmd->add_option("--m-aux", cfg.algo8.m_aux, "auxiliary path draws per assignment update")
            ->capture_default_str();
        hypers.add_flags(cmd);
        (void)seed;
        (void)workers;
    }
};

std::string metrics_header() { return "iteration\tchain\trate_err\tstate_err\tvi"; }

/// Rewrites a trace file keeping only the header and the first n_keep records
/// (used before resuming so appended records continue the sequence exactly).
void trim_trace(const std::string& path, std::int64_t n_keep) {
    if (!fs::exists(path)) return;
    std::ifstream is(path);
    std::string line, out;
    std::int64_t kept = 0;
    bool first = true;
    while (std::getline(is, line)) {
        if (first) {
            out += line + "\n";
            first = false;
            continue;
        }
        if (kept >= n_keep) break;
        out += line + "\n";
        ++kept;
    }
    is.close();
    write_text_atomic(path, out);
}

struct FitOutputs {
    mrel::SampleRecord map;
    bool has_map = false;
};

FitOutputs run_fit(const mrel::EdgeCountPanel& panel, mrel::RunConfig cfg,
                   const std::string& out_dir, bool resume,
                   const std::function<void(int, const mrel::SampleRecord&)>& extra_sink) {
    fs::create_directories(out_dir);
    std::vector<std::unique_ptr<std::ofstream>> traces;
    std::vector<std::string> trace_paths;
    for (int c = 0; c < cfg.n_chains; ++c) {
        std::string path = out_dir + "/trace_chain" + std::to_string(c) + ".tsv";
        trace_paths.push_back(path);
        bool fresh = true;
        if (resume) {
            std::string ckpt = out_dir + "/chain_" + std::to_string(c) + ".ckpt";
            if (fs::exists(ckpt)) {
                auto ck = mrel::read_checkpoint_file(ckpt, cfg.hypers);
                trim_trace(path, ck.n_emitted);
                fresh = false;
            }
        }
        auto os = std::make_unique<std::ofstream>(
            path, fresh ? std::ios::trunc : std::ios::app);
        if (!*os) throw std::runtime_error("cannot open " + path);
        if (fresh) *os << mrel::kTraceHeader << "\n";
        traces.push_back(std::move(os));
    }

    std::mutex sink_mutex;
    auto sink = [&](int chain, const mrel::SampleRecord& rec) {
        {
            std::lock_guard lock(sink_mutex);
            *traces[chain] << mrel::trace_line(rec) << "\n";
        }
        if (extra_sink) extra_sink(chain, rec);
    };
    auto results = mrel::run_chains(panel, cfg, sink, out_dir, resume);
    for (auto& os : traces) os->flush();

    std::vector<mrel::SampleRecord> bests;
    for (const auto& r : results)
        if (r.has_best) bests.push_back(r.best);
    FitOutputs out;
    if (!bests.empty()) {
        out.map = mrel::select_map(bests);
        out.has_map = true;
        write_text_atomic(out_dir + "/map_summary.json",
                          mrel::record_to_json(out.map).dump(2) + "\n");
    }
    std::int64_t exhausted = 0;
    for (const auto& r : results) exhausted += r.diag.shrink_exhausted;
    if (exhausted > 0)
        std::cerr << "note: slice shrink budget exhausted " << exhausted << " times\n";
    return out;
}

void write_reports(const std::vector<mrel::GroupReport>& reports,
                   const mrel::EdgeCountPanel& panel, const std::string& out_dir) {
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& rep = reports[i];
        char tag[16];
        std::snprintf(tag, sizeof tag, "%03zu", i);
        {
            std::ostringstream os;
            os << "edge";
            for (std::int64_t t = 1; t <= panel.T; ++t) os << "\tt" << t;
            os << "\n";
            for (std::size_t m = 0; m < rep.member_edges.size(); ++m) {
                os << rep.member_labels[m];
                for (auto y : rep.member_counts[m]) os << "\t" << y;
                os << "\n";
            }
            write_text_atomic(out_dir + "/group_" + tag + "_members.tsv", os.str());
        }
        {
            std::ostringstream os;
            os.precision(17);
            os << "t\tmean_deviation\tstate";
            if (!rep.deviation_sd.empty()) os << "\tdeviation_sd";
            os << "\n";
            for (std::int64_t t = 0; t < panel.T; ++t) {
                os << (t + 1) << "\t" << rep.mean_deviation[t] << "\t" << rep.states[t];
                if (!rep.deviation_sd.empty()) os << "\t" << rep.deviation_sd[t];
                os << "\n";
            }
            write_text_atomic(out_dir + "/group_" + tag + "_deviation.tsv", os.str());
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mrel: multilateral-relation discovery in temporal interaction networks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a config file (flags win)");

    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int workers = 1;
    app.add_option("--seed", seed, "RNG seed")->capture_default_str();
    app.add_option("--out-dir", out_dir, "output directory")->capture_default_str();
    app.add_option("--workers", workers, "concurrent chain workers")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "forward-sample a synthetic dataset");
    std::int64_t gen_edges = 1000, gen_slices = 52;
    HyperChoice gen_hypers;
    gen->add_option("--edges", gen_edges, "number of directed edges")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gen->add_option("--slices", gen_slices, "number of time slices")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gen_hypers.add_flags(gen);

    // ingest
    auto* ing = app.add_subcommand("ingest", "aggregate raw event records into a panel");
    std::string ing_input, ing_window, ing_granularity = "weekly", ing_date_format = "%Y-%m-%d";
    std::int64_t ing_top_k = 0;
    std::string ing_delimiter = "\t";
    int ing_src_col = 0, ing_dst_col = 1, ing_date_col = 2;
    double ing_malformed = 0.05;
    ing->add_option("--input", ing_input, "delimited event file")->required();
    ing->add_option("--granularity", ing_granularity, "daily|weekly|monthly")
        ->check(CLI::IsMember({"daily", "weekly", "monthly"}))
        ->capture_default_str();
    ing->add_option("--window", ing_window, "time window START..END (END exclusive)")->required();
    ing->add_option("--top-k", ing_top_k, "keep only the K most active edges (0 = all)")
        ->capture_default_str();
    ing->add_option("--delimiter", ing_delimiter, "field delimiter")->capture_default_str();
    ing->add_option("--src-col", ing_src_col, "source actor column")->capture_default_str();
    ing->add_option("--dst-col", ing_dst_col, "target actor column")->capture_default_str();
    ing->add_option("--date-col", ing_date_col, "date column")->capture_default_str();
    ing->add_option("--date-format", ing_date_format, "strptime-style date format")
        ->capture_default_str();
    ing->add_option("--max-malformed-rate", ing_malformed,
                    "tolerated fraction of malformed lines")
        ->capture_default_str();

    // fit
    auto* fit = app.add_subcommand("fit", "run MCMC and select the MAP sample");
    FitFlags fit_flags;
    fit_flags.add_flags(fit, &seed, &workers);

    // report
    auto* rep = app.add_subcommand("report", "emit per-group report and plot-data files");
    std::string rep_panel, rep_map;
    int rep_delta_draws = 0;
    HyperChoice rep_hypers;
    rep->add_option("--panel", rep_panel, "panel file the MAP sample was fit on")->required();
    rep->add_option("--map", rep_map, "MAP summary JSON from fit")->required();
    rep->add_option("--delta-draws", rep_delta_draws,
                    "Monte Carlo draws for a deviation_sd column (0 = off)")
        ->capture_default_str();
    rep_hypers.add_flags(rep);

    // recover
    auto* rec = app.add_subcommand("recover",
                                   "fit a synthetic panel and track recovery error metrics");
    FitFlags rec_flags;
    std::string rec_truth;
    rec_flags.add_flags(rec, &seed, &workers);
    rec->add_option("--truth", rec_truth, "truth sidecar JSON from generate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            auto hypers = gen_hypers.resolve();
            mrel::RngStream rng(seed, 0);
            auto truth = mrel::generate(gen_edges, gen_slices, hypers, rng);
            fs::create_directories(out_dir);
            mrel::write_panel_file(out_dir + "/panel.txt", truth.panel);
            mrel::write_truth_file(out_dir + "/truth.json", truth);
            std::cout << "wrote " << out_dir << "/panel.txt (" << truth.panel.n_edges()
                      << " edges x " << truth.panel.T << " slices, "
                      << truth.partition.n_groups() << " groups) and truth.json\n";
        } else if (*ing) {
            auto sep = ing_window.find("..");
            if (sep == std::string::npos)
                throw CLI::ValidationError("--window", "expected START..END");
            mrel::BinningSpec spec;
            spec.granularity = mrel::parse_granularity(ing_granularity);
            spec.start = mrel::parse_date(ing_window.substr(0, sep), "%Y-%m-%d");
            spec.end = mrel::parse_date(ing_window.substr(sep + 2), "%Y-%m-%d");
            spec.validate();
            mrel::EventFormat format;
            if (ing_delimiter.size() != 1)
                throw CLI::ValidationError("--delimiter", "must be a single character");
            format.delimiter = ing_delimiter[0];
            format.src_col = ing_src_col;
            format.dst_col = ing_dst_col;
            format.date_col = ing_date_col;
            format.date_format = ing_date_format;
            format.max_malformed_rate = ing_malformed;
            std::ifstream is(ing_input);
            if (!is) throw std::runtime_error("cannot open " + ing_input);
            mrel::ParseStats stats;
            auto records = mrel::parse_events(is, format, &stats);
            auto panel = mrel::aggregate(records, spec);
            if (ing_top_k > 0) panel = mrel::top_k_edges(panel, ing_top_k);
            fs::create_directories(out_dir);
            mrel::write_panel_file(out_dir + "/panel.txt", panel);
            std::cout << "parsed " << stats.parsed << " events (" << stats.malformed
                      << " malformed, " << stats.self_loops << " self-loops dropped); wrote "
                      << out_dir << "/panel.txt (" << panel.n_edges() << " edges x "
                      << panel.T << " slices)\n";
        } else if (*fit) {
            auto panel = mrel::read_panel_file(fit_flags.panel_path);
            mrel::RunConfig cfg = fit_flags.cfg;
            cfg.hypers = fit_flags.hypers.resolve();
            cfg.seed = seed;
            cfg.workers = workers;
            cfg.validate();
            auto out = run_fit(panel, cfg, out_dir, fit_flags.resume, nullptr);
            if (out.has_map)
                std::cout << "MAP sample: chain " << out.map.chain << " iteration "
                          << out.map.iteration << " joint_logprob " << out.map.joint_logprob
                          << " (" << out.map.partition.n_groups() << " groups); wrote "
                          << out_dir << "/map_summary.json\n";
        } else if (*rep) {
            auto panel = mrel::read_panel_file(rep_panel);
            std::ifstream is(rep_map);
            if (!is) throw std::runtime_error("cannot open " + rep_map);
            json j;
            is >> j;
            auto map = mrel::record_from_json(j);
            auto hypers = rep_hypers.resolve();
            auto reports =
                mrel::posterior_group_report(map, panel, hypers, rep_delta_draws, seed);
            write_reports(reports, panel, out_dir);
            std::cout << "wrote " << reports.size() << " group report pairs to " << out_dir
                      << "\n";
        } else if (*rec) {
            auto panel = mrel::read_panel_file(rec_flags.panel_path);
            auto truth = mrel::read_truth_file(rec_truth);
            if (truth.base_rates.size() != panel.n_edges())
                throw std::runtime_error("truth sidecar does not match panel edge count");
            mrel::RunConfig cfg = rec_flags.cfg;
            cfg.hypers = rec_flags.hypers.resolve();
            cfg.seed = seed;
            cfg.workers = workers;
            cfg.validate();

            std::mutex rows_mutex;
            std::vector<std::tuple<int, std::int64_t, std::string>> rows;
            auto metric_sink = [&](int chain, const mrel::SampleRecord& r) {
                double rate_err = mrel::base_rate_error(truth.base_rates, r.base_rates);
                double st_err = mrel::state_error(truth.partition, truth.paths,
                                                  r.partition, r.paths);
                double vi = mrel::variation_of_information(truth.partition, r.partition);
                std::ostringstream os;
                os.precision(17);
                os << r.iteration << "\t" << chain << "\t" << rate_err << "\t" << st_err
                   << "\t" << vi;
                std::lock_guard lock(rows_mutex);
                rows.emplace_back(chain, r.iteration, os.str());
            };
            auto out = run_fit(panel, cfg, out_dir, rec_flags.resume, metric_sink);
            std::sort(rows.begin(), rows.end());
            std::string text = metrics_header() + "\n";
            for (const auto& [c, i, line] : rows) text += line + "\n";
            write_text_atomic(out_dir + "/metrics.tsv", text);
            std::cout << "wrote " << out_dir << "/metrics.tsv (" << rows.size() << " rows)";
            if (out.has_map)
                std::cout << "; MAP joint_logprob " << out.map.joint_logprob;
            std::cout << "\n";
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
