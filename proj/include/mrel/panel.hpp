#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mrel {

struct Edge {
    std::string src;
    std::string dst;

    bool operator==(const Edge& o) const { return src == o.src && dst == o.dst; }
    bool operator<(const Edge& o) const {
        return src != o.src ? src < o.src : dst < o.dst;
    }
};

/// Observed tensor: per directed edge, a length-T sequence of interaction counts.
struct EdgeCountPanel {
    std::vector<Edge> edges;
    std::vector<std::vector<std::int64_t>> counts;  // [edge][t]
    std::int64_t T = 0;
    std::string bin_spec = "unspecified";
    std::map<std::string, std::string> actor_names;  // optional display names

    std::size_t n_edges() const { return edges.size(); }

    void validate() const {
        if (T < 1) throw std::invalid_argument("panel: T must be >= 1");
        if (edges.size() != counts.size())
            throw std::invalid_argument("panel: edges/counts size mismatch");
        std::set<std::pair<std::string, std::string>> seen;
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (edges[e].src == edges[e].dst)
                throw std::invalid_argument("panel: self-loop edge " + edges[e].src);
            if (!seen.insert({edges[e].src, edges[e].dst}).second)
                throw std::invalid_argument("panel: duplicate edge " + edges[e].src +
                                            "->" + edges[e].dst);
            if (static_cast<std::int64_t>(counts[e].size()) != T)
                throw std::invalid_argument("panel: count series length != T");
            for (auto y : counts[e])
                if (y < 0) throw std::invalid_argument("panel: negative count");
        }
    }
};

// Panel file format (see docs/formats.md):
//   #mrel-panel v1
//   T <T>
//   bins <free-form bin spec>
//   edges <E>
//   <src> <dst> <y1,y2,...,yT>     (one row per edge)

inline void write_panel(std::ostream& os, const EdgeCountPanel& panel) {
    os << "#mrel-panel v1\n";
    os << "T " << panel.T << "\n";
    os << "bins " << panel.bin_spec << "\n";
    os << "edges " << panel.edges.size() << "\n";
    for (std::size_t e = 0; e < panel.edges.size(); ++e) {
        os << panel.edges[e].src << " " << panel.edges[e].dst << " ";
        for (std::int64_t t = 0; t < panel.T; ++t) {
            if (t) os << ",";
            os << panel.counts[e][t];
        }
        os << "\n";
    }
}

inline EdgeCountPanel read_panel(std::istream& is) {
    EdgeCountPanel panel;
    std::string line;
    if (!std::getline(is, line) || line != "#mrel-panel v1")
        throw std::runtime_error("panel: bad magic line");
    std::string key;
    std::int64_t n_edges = -1;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error("panel: truncated header");
        std::istringstream ls(line);
        ls >> key;
        if (key == "T") ls >> panel.T;
        else if (key == "bins") {
            std::getline(ls, panel.bin_spec);
            if (!panel.bin_spec.empty() && panel.bin_spec[0] == ' ')
                panel.bin_spec.erase(0, 1);
        } else if (key == "edges") ls >> n_edges;
        else throw std::runtime_error("panel: unknown header key " + key);
    }
    if (n_edges < 0) throw std::runtime_error("panel: missing edges header");
    for (std::int64_t e = 0; e < n_edges; ++e) {
        if (!std::getline(is, line)) throw std::runtime_error("panel: truncated body");
        std::istringstream ls(line);
        Edge edge;
        std::string cell;
        if (!(ls >> edge.src >> edge.dst >> cell))
            throw std::runtime_error("panel: malformed edge row");
        std::vector<std::int64_t> ys;
        std::istringstream cs(cell);
        std::string tok;
        while (std::getline(cs, tok, ',')) ys.push_back(std::stoll(tok));
        panel.edges.push_back(std::move(edge));
        panel.counts.push_back(std::move(ys));
    }
    panel.validate();
    return panel;
}

inline void write_panel_file(const std::string& path, const EdgeCountPanel& panel) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw std::runtime_error("cannot open " + tmp);
        write_panel(os, panel);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

inline EdgeCountPanel read_panel_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_panel(is);
}

}  // namespace mrel
