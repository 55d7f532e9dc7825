#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mrel {

/// Assignment of each edge to a group label.  Canonical form labels groups in
/// order of first appearance by edge index, so two partitions are equal as
/// set-partitions iff their label vectors are equal.
///
/// During a Gibbs sweep groups may transiently be empty (occupancy 0); callers
/// compact and re-canonicalize at sweep end via canonicalize().
class Partition {
  public:
    Partition() = default;

    static Partition single_group(std::size_t n_edges) {
        Partition p;
        p.assignment_.assign(n_edges, 0);
        p.occupancy_.assign(1, static_cast<int>(n_edges));
        return p;
    }

    /// Builds from an arbitrary label vector, canonicalizing labels.
    static Partition from_labels(const std::vector<int>& labels) {
        Partition p;
        p.assignment_.resize(labels.size());
        std::vector<int> remap;
        for (std::size_t e = 0; e < labels.size(); ++e) {
            int raw = labels[e];
            if (raw < 0) throw std::invalid_argument("partition: negative label");
            int g = -1;
            for (std::size_t k = 0; k < remap.size(); ++k)
                if (remap[k] == raw) { g = static_cast<int>(k); break; }
            if (g < 0) {
                g = static_cast<int>(remap.size());
                remap.push_back(raw);
                p.occupancy_.push_back(0);
            }
            p.assignment_[e] = g;
            ++p.occupancy_[g];
        }
        return p;
    }

    std::size_t n_edges() const { return assignment_.size(); }
    int n_groups() const { return static_cast<int>(occupancy_.size()); }
    int group_of(std::size_t edge) const { return assignment_[edge]; }
    int occupancy(int g) const { return occupancy_[g]; }
    const std::vector<int>& labels() const { return assignment_; }

    /// Removes an edge from its group.  The group may become empty; it keeps
    /// its label slot until canonicalize().  Returns the old group label.
    int remove_edge(std::size_t edge) {
        int g = assignment_[edge];
        if (g < 0) throw std::logic_error("partition: edge already detached");
        --occupancy_[g];
        assignment_[edge] = -1;
        return g;
    }

    /// Assigns a detached edge to an existing group.
    void assign(std::size_t edge, int g) {
        if (assignment_[edge] != -1) throw std::logic_error("partition: edge not detached");
        assignment_[edge] = g;
        ++occupancy_[g];
    }

    /// Assigns a detached edge to a brand-new group; returns its label.
    int assign_new_group(std::size_t edge) {
        int g = static_cast<int>(occupancy_.size());
        occupancy_.push_back(0);
        assign(edge, g);
        return g;
    }

    /// Compacts empty label slots and relabels by first appearance.
    /// Returns old-label -> new-label (-1 for dropped empty slots).
    std::vector<int> canonicalize() {
        std::vector<int> relabel(occupancy_.size(), -1);
        std::vector<int> new_occ;
        for (std::size_t e = 0; e < assignment_.size(); ++e) {
            int g = assignment_[e];
            if (g < 0) throw std::logic_error("partition: detached edge at canonicalize");
            if (relabel[g] < 0) {
                relabel[g] = static_cast<int>(new_occ.size());
                new_occ.push_back(occupancy_[g]);
            }
            assignment_[e] = relabel[g];
        }
        occupancy_ = std::move(new_occ);
        return relabel;
    }

    bool is_canonical() const {
        int next = 0;
        std::vector<bool> seen(occupancy_.size(), false);
        std::int64_t total = 0;
        for (int g : assignment_) {
            if (g < 0 || g >= n_groups()) return false;
            if (!seen[g]) {
                if (g != next) return false;
                seen[g] = true;
                ++next;
            }
        }
        if (next != n_groups()) return false;
        std::vector<int> occ(occupancy_.size(), 0);
        for (int g : assignment_) ++occ[g];
        for (int g = 0; g < n_groups(); ++g) {
            if (occ[g] != occupancy_[g] || occ[g] < 1) return false;
            total += occ[g];
        }
        return total == static_cast<std::int64_t>(assignment_.size());
    }

    void validate() const {
        if (!is_canonical()) throw std::logic_error("partition: not in canonical form");
    }

    /// Member edge indices of group g in increasing order.
    std::vector<int> members(int g) const {
        std::vector<int> out;
        for (std::size_t e = 0; e < assignment_.size(); ++e)
            if (assignment_[e] == g) out.push_back(static_cast<int>(e));
        return out;
    }

    bool operator==(const Partition& o) const { return assignment_ == o.assignment_; }

  private:
    std::vector<int> assignment_;
    std::vector<int> occupancy_;
};

/// Per-group HMM state sequence s^(1..T); the virtual start s^(0)=0 is implicit.
struct GroupStatePath {
    std::vector<int> states;

    bool operator==(const GroupStatePath& o) const { return states == o.states; }
};

}  // namespace mrel
