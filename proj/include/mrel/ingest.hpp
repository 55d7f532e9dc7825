#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrel/panel.hpp"

namespace mrel {

/// One raw directed event: source actor, target actor, calendar day.
struct EventRecord {
    std::string src;
    std::string dst;
    std::chrono::year_month_day date;
};

enum class BinGranularity { daily, weekly, monthly };

inline BinGranularity parse_granularity(const std::string& s) {
    if (s == "daily") return BinGranularity::daily;
    if (s == "weekly") return BinGranularity::weekly;
    if (s == "monthly") return BinGranularity::monthly;
    throw std::invalid_argument("unknown granularity: " + s);
}

inline std::string to_string(BinGranularity g) {
    switch (g) {
        case BinGranularity::daily: return "daily";
        case BinGranularity::weekly: return "weekly";
        case BinGranularity::monthly: return "monthly";
    }
    return "?";
}

struct BinningSpec {
    BinGranularity granularity = BinGranularity::weekly;
    std::chrono::year_month_day start{};  // inclusive
    std::chrono::year_month_day end{};    // exclusive

    void validate() const {
        if (!(std::chrono::sys_days(start) < std::chrono::sys_days(end)))
            throw std::invalid_argument("binning: window start must precede end");
    }
};

struct EventFormat {
    char delimiter = '\t';
    int src_col = 0;
    int dst_col = 1;
    int date_col = 2;
    std::string date_format = "%Y-%m-%d";
    double max_malformed_rate = 0.05;  // fraction of malformed lines tolerated
};

struct ParseStats {
    std::int64_t parsed = 0;
    std::int64_t malformed = 0;
    std::int64_t self_loops = 0;  // dropped, counted separately from malformed
    std::string first_bad_line;
};

inline std::chrono::year_month_day parse_date(const std::string& text,
                                              const std::string& format) {
    std::tm tm{};
    std::istringstream is(text);
    is >> std::get_time(&tm, format.c_str());
    if (is.fail()) throw std::runtime_error("unparseable date: " + text);
    auto ymd = std::chrono::year{tm.tm_year + 1900} /
               std::chrono::month{static_cast<unsigned>(tm.tm_mon + 1)} /
               std::chrono::day{static_cast<unsigned>(tm.tm_mday)};
    if (!ymd.ok()) throw std::runtime_error("invalid date: " + text);
    return ymd;
}

/// Parses delimited event records.  Malformed lines are counted, not fatal,
/// up to format.max_malformed_rate; self-loop rows are dropped and counted.
inline std::vector<EventRecord> parse_events(std::istream& is, const EventFormat& format,
                                             ParseStats* stats_out = nullptr) {
    std::vector<EventRecord> records;
    ParseStats stats;
    std::string line;
    std::int64_t line_no = 0;
    const int max_col = std::max({format.src_col, format.dst_col, format.date_col});
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, format.delimiter)) cells.push_back(cell);
        try {
            if (static_cast<int>(cells.size()) <= max_col)
                throw std::runtime_error("too few columns");
            EventRecord rec;
            rec.src = cells[format.src_col];
            rec.dst = cells[format.dst_col];
            rec.date = parse_date(cells[format.date_col], format.date_format);
            if (rec.src.empty() || rec.dst.empty()) throw std::runtime_error("empty actor");
            if (rec.src == rec.dst) {
                ++stats.self_loops;
                continue;
            }
            records.push_back(std::move(rec));
            ++stats.parsed;
        } catch (const std::exception& ex) {
            ++stats.malformed;
            if (stats.first_bad_line.empty())
                stats.first_bad_line = "line " + std::to_string(line_no) + ": " + ex.what();
        }
    }
    std::int64_t total = stats.parsed + stats.malformed + stats.self_loops;
    if (total > 0 &&
        static_cast<double>(stats.malformed) > format.max_malformed_rate * total)
        throw std::runtime_error("malformed-line rate above threshold (" +
                                 std::to_string(stats.malformed) + "/" +
                                 std::to_string(total) + "); first: " +
                                 stats.first_bad_line);
    if (stats_out) *stats_out = stats;
    return records;
}

namespace detail {

/// Number of bins in the window; weekly bins are 7-day blocks anchored at the
/// window start, with a final short bin kept only if it spans >= 4 days.
inline std::int64_t bin_count(const BinningSpec& spec) {
    using std::chrono::sys_days;
    const std::int64_t days = (sys_days(spec.end) - sys_days(spec.start)).count();
    switch (spec.granularity) {
        case BinGranularity::daily:
            return days;
        case BinGranularity::weekly: {
            std::int64_t full = days / 7, rem = days % 7;
            return full + (rem >= 4 ? 1 : 0);
        }
        case BinGranularity::monthly: {
            auto span = [](const std::chrono::year_month_day& d) {
                return static_cast<std::int64_t>(static_cast<int>(d.year())) * 12 +
                       static_cast<std::int64_t>(static_cast<unsigned>(d.month())) - 1;
            };
            // calendar months intersecting [start, end)
            std::chrono::year_month_day last{sys_days(spec.end) - std::chrono::days{1}};
            return span(last) - span(spec.start) + 1;
        }
    }
    return 0;
}

/// Bin index of a date inside the window, or -1 if out of window / in a
/// dropped trailing short weekly bin.
inline std::int64_t bin_index(const BinningSpec& spec, std::int64_t n_bins,
                              const std::chrono::year_month_day& date) {
    using std::chrono::sys_days;
    if (!(sys_days(date) >= sys_days(spec.start) && sys_days(date) < sys_days(spec.end)))
        return -1;
    const std::int64_t days = (sys_days(date) - sys_days(spec.start)).count();
    std::int64_t idx = 0;
    switch (spec.granularity) {
        case BinGranularity::daily: idx = days; break;
        case BinGranularity::weekly: idx = days / 7; break;
        case BinGranularity::monthly: {
            auto span = [](const std::chrono::year_month_day& d) {
                return static_cast<std::int64_t>(static_cast<int>(d.year())) * 12 +
                       static_cast<std::int64_t>(static_cast<unsigned>(d.month())) - 1;
            };
            idx = span(date) - span(spec.start);
            break;
        }
    }
    return idx < n_bins ? idx : -1;
}

inline std::string format_ymd(const std::chrono::year_month_day& d) {
    std::ostringstream os;
    os << std::setfill('0') << std::setw(4) << static_cast<int>(d.year()) << "-"
       << std::setw(2) << static_cast<unsigned>(d.month()) << "-" << std::setw(2)
       << static_cast<unsigned>(d.day());
    return os.str();
}

}  // namespace detail

/// Bins in-window records into per-edge count series.  Records outside the
/// window are dropped; edges with zero total count cannot arise (only
/// observed pairs get rows).
inline EdgeCountPanel aggregate(const std::vector<EventRecord>& records,
                                const BinningSpec& spec) {
    spec.validate();
    const std::int64_t T = detail::bin_count(spec);
    if (T < 1) throw std::invalid_argument("aggregate: window yields no bins");
    std::map<Edge, std::vector<std::int64_t>> cells;
    for (const auto& rec : records) {
        std::int64_t t = detail::bin_index(spec, T, rec.date);
        if (t < 0) continue;
        auto [it, inserted] = cells.try_emplace(Edge{rec.src, rec.dst});
        if (inserted) it->second.assign(T, 0);
        ++it->second[t];
    }
    EdgeCountPanel panel;
    panel.T = T;
    panel.bin_spec = to_string(spec.granularity) + " " + detail::format_ymd(spec.start) +
                     ".." + detail::format_ymd(spec.end);
    for (auto& [edge, counts] : cells) {
        panel.edges.push_back(edge);
        panel.counts.push_back(std::move(counts));
    }
    panel.validate();
    return panel;
}

/// Keeps the K edges with largest total count; ties broken by lexicographic
/// (source, target).  Identity when K >= number of edges.
inline EdgeCountPanel top_k_edges(const EdgeCountPanel& panel, std::int64_t k) {
    if (k < 1) throw std::invalid_argument("top_k_edges: K >= 1 required");
    std::vector<std::size_t> order(panel.n_edges());
    std::vector<std::int64_t> totals(panel.n_edges(), 0);
    for (std::size_t e = 0; e < panel.n_edges(); ++e) {
        order[e] = e;
        for (auto y : panel.counts[e]) totals[e] += y;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (totals[a] != totals[b]) return totals[a] > totals[b];
        return panel.edges[a] < panel.edges[b];
    });
    if (static_cast<std::int64_t>(order.size()) > k) order.resize(k);
    EdgeCountPanel out;
    out.T = panel.T;
    out.bin_spec = panel.bin_spec;
    out.actor_names = panel.actor_names;
    for (std::size_t e : order) {
        out.edges.push_back(panel.edges[e]);
        out.counts.push_back(panel.counts[e]);
    }
    return out;
}

}  // namespace mrel
