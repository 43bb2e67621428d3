#pragma once

#include <span>
#include <string>
#include <vector>

#include "loopsrg/cycle_bases.hpp"
#include "loopsrg/graph.hpp"
#include "loopsrg/markov.hpp"

namespace loopsrg {

enum class RegionLevel { loop, edge, node };

std::string to_string(RegionLevel level);

struct Region {
    RegionLevel level = RegionLevel::node;
    // Sorted variable indices.
    std::vector<Vertex> scope;
    // Variables in ring order: the cycle order for loops, (u, v) for edges and
    // the single variable for nodes. Consecutive entries (cyclically, for
    // three or more) are the region's structure edges.
    std::vector<Vertex> ring;
    // Factors assigned directly to this region.
    std::vector<Vertex> unary_factors;
    std::vector<int> pair_factors;
    int kappa = 0;
};

struct RegionArc {
    int parent;
    int child;
};

// Directed region poset. Regions and arcs are immutable after construction;
// counting numbers are computed at build time by the public constructors.
class RegionGraph {
public:
    RegionGraph() = default;
    // Checks indices only; structural properties are reported by validate().
    RegionGraph(std::vector<Region> regions, std::vector<RegionArc> arcs);

    const std::vector<Region>& regions() const { return regions_; }
    const Region& region(int id) const { return regions_[id]; }
    int size() const { return static_cast<int>(regions_.size()); }
    const std::vector<RegionArc>& arcs() const { return arcs_; }
    const std::vector<int>& parents(int id) const { return parents_[id]; }
    const std::vector<int>& children(int id) const { return children_[id]; }
    // Arc ids whose child is `id` / whose parent is `id`.
    const std::vector<int>& arcs_into(int id) const { return arcs_into_[id]; }
    const std::vector<int>& arcs_from(int id) const { return arcs_from_[id]; }

    int count(RegionLevel level) const;

    void set_counting_numbers(std::span<const int> kappa);

private:
    std::vector<Region> regions_;
    std::vector<RegionArc> arcs_;
    std::vector<std::vector<int>> parents_;
    std::vector<std::vector<int>> children_;
    std::vector<std::vector<int>> arcs_into_;
    std::vector<std::vector<int>> arcs_from_;
};

// Loops, then edges in canonical order, then nodes; ids follow that order.
RegionGraph build_loop_srg(const Graph& g, const CycleBasis& b);

// Edge regions for every pairwise factor, node regions for every variable.
RegionGraph build_bethe(const Graph& g);

// kappa_R = 1 - sum over ancestors; throws ValidationError on a directed
// cycle.
std::vector<int> counting_numbers(const RegionGraph& rg);

namespace testing {
// Loop-SRG over an arbitrary loop set (not necessarily a basis). Used to
// build singular region graphs for negative tests.
RegionGraph build_loop_srg_unchecked(const Graph& g, std::span<const Cycle> loops);
} // namespace testing

struct ValidationReport {
    bool balanced = true;          // sum of kappa over R(i) is 1 for every i
    bool connected = true;         // regions containing i form a connected subgraph
    bool factor_coverage = true;   // each factor counted once by the kappa-weighted regions containing it
    bool scopes_nested = true;     // every parent scope strictly contains its child scope
    int kappa_sum = 0;
    int loop_count = 0;
    int edge_count = 0;
    int node_count = 0;
    // |L| - |E| + |V| for loop graphs.
    int loop_identity = 0;
    bool singular = false;
    std::vector<std::size_t> singular_witness;
    std::vector<std::string> violations;

    bool ok() const { return balanced && connected && factor_coverage && scopes_nested && !singular; }
};

ValidationReport validate(const RegionGraph& rg, const MarkovNet& m);

// For each region, the set of regions reachable by following child arcs,
// including the region itself.
std::vector<std::vector<int>> down_sets(const RegionGraph& rg);

// One line per region: "<id> <level> scope=a,b,.. kappa=k parents=p,q|-".
std::string dump(const RegionGraph& rg);

} // namespace loopsrg
