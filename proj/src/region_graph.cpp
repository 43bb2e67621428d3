#include "loopsrg/region_graph.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "loopsrg/error.hpp"

namespace loopsrg {

std::string to_string(RegionLevel level)
{
    switch (level) {
    case RegionLevel::loop:
        return "loop";
    case RegionLevel::edge:
        return "edge";
    case RegionLevel::node:
        return "node";
    }
    return "?";
}

RegionGraph::RegionGraph(std::vector<Region> regions, std::vector<RegionArc> arcs)
    : regions_(std::move(regions)), arcs_(std::move(arcs))
{
    const int n = size();
    parents_.assign(n, {});
    children_.assign(n, {});
    arcs_into_.assign(n, {});
    arcs_from_.assign(n, {});
    for (int id = 0; id < static_cast<int>(arcs_.size()); ++id) {
        const auto& a = arcs_[id];
        if (a.parent < 0 || a.child < 0 || a.parent >= n || a.child >= n || a.parent == a.child)
            throw ValidationError("region arc " + std::to_string(a.parent) + "->" + std::to_string(a.child) + " is invalid");
        parents_[a.child].push_back(a.parent);
        children_[a.parent].push_back(a.child);
        arcs_into_[a.child].push_back(id);
        arcs_from_[a.parent].push_back(id);
    }
}

int RegionGraph::count(RegionLevel level) const
{
    return static_cast<int>(std::count_if(regions_.begin(), regions_.end(), [&](const Region& r) { return r.level == level; }));
}

void RegionGraph::set_counting_numbers(std::span<const int> kappa)
{
    if (kappa.size() != regions_.size())
        throw ValidationError("counting number count mismatch");
    for (std::size_t i = 0; i < kappa.size(); ++i)
        regions_[i].kappa = kappa[i];
}

namespace {

std::vector<int> topological_order(const RegionGraph& rg)
{
    std::vector<int> indegree(rg.size(), 0);
    for (const auto& a : rg.arcs())
        ++indegree[a.child];
    std::deque<int> ready;
    for (int r = 0; r < rg.size(); ++r)
        if (indegree[r] == 0)
            ready.push_back(r);
    std::vector<int> order;
    while (!ready.empty()) {
        int r = ready.front();
        ready.pop_front();
        order.push_back(r);
        for (int c : rg.children(r))
            if (--indegree[c] == 0)
                ready.push_back(c);
    }
    if (static_cast<int>(order.size()) != rg.size())
        throw ValidationError("region graph contains a directed cycle");
    return order;
}

Region edge_region(const Graph& g, int id)
{
    const Edge& e = g.edge(id);
    Region r;
    r.level = RegionLevel::edge;
    r.scope = {e.u, e.v};
    r.ring = {e.u, e.v};
    r.pair_factors = {id};
    return r;
}

Region node_region(Vertex v)
{
    Region r;
    r.level = RegionLevel::node;
    r.scope = {v};
    r.ring = {v};
    r.unary_factors = {v};
    return r;
}

RegionGraph finish(std::vector<Region> regions, std::vector<RegionArc> arcs)
{
    RegionGraph rg(std::move(regions), std::move(arcs));
    rg.set_counting_numbers(counting_numbers(rg));
    return rg;
}

} // namespace

std::vector<int> counting_numbers(const RegionGraph& rg)
{
    const auto order = topological_order(rg);
    // Ancestor sets via the topological order.
    std::vector<std::vector<bool>> ancestor(rg.size(), std::vector<bool>(rg.size(), false));
    for (int r : order)
        for (int p : rg.parents(r)) {
            ancestor[r][p] = true;
            for (int a = 0; a < rg.size(); ++a)
                if (ancestor[p][a])
                    ancestor[r][a] = true;
        }
    std::vector<int> kappa(rg.size(), 0);
    for (int r : order) {
        int sum = 0;
        for (int a = 0; a < rg.size(); ++a)
            if (ancestor[r][a])
                sum += kappa[a];
        kappa[r] = 1 - sum;
    }
    return kappa;
}

namespace testing {

RegionGraph build_loop_srg_unchecked(const Graph& g, std::span<const Cycle> loops)
{
    std::vector<Region> regions;
    std::vector<RegionArc> arcs;
    const int n_loops = static_cast<int>(loops.size());
    const int edge_base = n_loops;
    const int node_base = n_loops + g.num_edges();
    for (int l = 0; l < n_loops; ++l) {
        const Cycle& c = loops[l];
        Region r;
        r.level = RegionLevel::loop;
        r.ring = c.vertices();
        r.scope = c.vertices();
        std::sort(r.scope.begin(), r.scope.end());
        regions.push_back(std::move(r));
        for (const auto& e : c.edges()) {
            auto id = g.edge_id(e.u, e.v);
            if (!id)
                throw ValidationError("loop " + to_string(c) + " uses non-edge " + to_string(e));
            arcs.push_back({l, edge_base + *id});
        }
    }
    for (int id = 0; id < g.num_edges(); ++id) {
        regions.push_back(edge_region(g, id));
        arcs.push_back({edge_base + id, node_base + g.edge(id).u});
        arcs.push_back({edge_base + id, node_base + g.edge(id).v});
    }
    for (Vertex v = 0; v < g.num_vertices(); ++v)
        regions.push_back(node_region(v));
    return finish(std::move(regions), std::move(arcs));
}

} // namespace testing

RegionGraph build_loop_srg(const Graph& g, const CycleBasis& b)
{
    if (!(b.host() == g))
        throw ValidationError("build_loop_srg: basis belongs to a different graph");
    return testing::build_loop_srg_unchecked(g, b.cycles());
}

RegionGraph build_bethe(const Graph& g)
{
    std::vector<Region> regions;
    std::vector<RegionArc> arcs;
    const int node_base = g.num_edges();
    for (int id = 0; id < g.num_edges(); ++id) {
        regions.push_back(edge_region(g, id));
        arcs.push_back({id, node_base + g.edge(id).u});
        arcs.push_back({id, node_base + g.edge(id).v});
    }
    for (Vertex v = 0; v < g.num_vertices(); ++v)
        regions.push_back(node_region(v));
    return finish(std::move(regions), std::move(arcs));
}

std::vector<std::vector<int>> down_sets(const RegionGraph& rg)
{
    std::vector<std::vector<int>> out(rg.size());
    for (int r = 0; r < rg.size(); ++r) {
        std::vector<bool> seen(rg.size(), false);
        std::vector<int> stack{r};
        seen[r] = true;
        while (!stack.empty()) {
            int x = stack.back();
            stack.pop_back();
            out[r].push_back(x);
            for (int c : rg.children(x))
                if (!seen[c]) {
                    seen[c] = true;
                    stack.push_back(c);
                }
        }
        std::sort(out[r].begin(), out[r].end());
    }
    return out;
}

ValidationReport validate(const RegionGraph& rg, const MarkovNet& m)
{
    ValidationReport rep;
    const int n = m.num_vars();
    const auto& regions = rg.regions();
    rep.loop_count = rg.count(RegionLevel::loop);
    rep.edge_count = rg.count(RegionLevel::edge);
    rep.node_count = rg.count(RegionLevel::node);
    rep.loop_identity = rep.loop_count - rep.edge_count + rep.node_count;
    for (const auto& r : regions)
        rep.kappa_sum += r.kappa;

    for (const auto& a : rg.arcs()) {
        const auto& ps = regions[a.parent].scope;
        const auto& cs = regions[a.child].scope;
        if (ps.size() <= cs.size() || !std::includes(ps.begin(), ps.end(), cs.begin(), cs.end())) {
            rep.scopes_nested = false;
            rep.violations.push_back("arc " + std::to_string(a.parent) + "->" + std::to_string(a.child) +
                                     ": parent scope does not strictly contain child scope");
        }
    }

    for (Vertex i = 0; i < n; ++i) {
        std::vector<int> holders;
        int sum = 0;
        for (int r = 0; r < rg.size(); ++r)
            if (std::binary_search(regions[r].scope.begin(), regions[r].scope.end(), i)) {
                holders.push_back(r);
                sum += regions[r].kappa;
            }
        if (sum != 1) {
            rep.balanced = false;
            rep.violations.push_back("variable " + std::to_string(i) + ": kappa sum " + std::to_string(sum));
        }
        if (holders.empty())
            continue;
        // Connectivity of the regions containing i, through arcs among them.
        std::vector<bool> member(rg.size(), false), seen(rg.size(), false);
        for (int r : holders)
            member[r] = true;
        std::vector<int> stack{holders.front()};
        seen[holders.front()] = true;
        std::size_t reached = 0;
        while (!stack.empty()) {
            int r = stack.back();
            stack.pop_back();
            ++reached;
            auto visit = [&](int x) {
                if (member[x] && !seen[x]) {
                    seen[x] = true;
                    stack.push_back(x);
                }
            };
            for (int c : rg.children(r))
                visit(c);
            for (int p : rg.parents(r))
                visit(p);
        }
        if (reached != holders.size()) {
            rep.connected = false;
            rep.violations.push_back("variable " + std::to_string(i) + ": regions containing it are not connected");
        }
    }

    // A region contains a factor when the factor is assigned to it or to one
    // of its descendants.
    const auto down = down_sets(rg);
    std::vector<int> unary_sum(n, 0);
    std::vector<int> pair_sum(m.graph().num_edges(), 0);
    std::vector<int> unary_seen(n, -1), pair_seen(m.graph().num_edges(), -1);
    for (int r = 0; r < rg.size(); ++r) {
        for (int d : down[r]) {
            for (Vertex v : regions[d].unary_factors)
                if (unary_seen[v] != r) {
                    unary_seen[v] = r;
                    unary_sum[v] += regions[r].kappa;
                }
            for (int e : regions[d].pair_factors)
                if (pair_seen[e] != r) {
                    pair_seen[e] = r;
                    pair_sum[e] += regions[r].kappa;
                }
        }
    }
    for (Vertex v = 0; v < n; ++v)
        if (unary_sum[v] != 1) {
            rep.factor_coverage = false;
            rep.violations.push_back("unary factor " + std::to_string(v) + ": coverage " + std::to_string(unary_sum[v]));
        }
    for (int e = 0; e < m.graph().num_edges(); ++e)
        if (pair_sum[e] != 1) {
            rep.factor_coverage = false;
            rep.violations.push_back("pair factor " + to_string(m.graph().edge(e)) + ": coverage " + std::to_string(pair_sum[e]));
        }

    std::vector<Cycle> loops;
    for (const auto& r : regions)
        if (r.level == RegionLevel::loop)
            loops.emplace_back(r.ring);
    if (!loops.empty()) {
        auto sing = is_singular_loopset(loops);
        rep.singular = sing.singular || rep.kappa_sum > 1;
        rep.singular_witness = std::move(sing.witness);
        if (rep.singular)
            rep.violations.push_back("loop regions are singular");
    }
    return rep;
}

std::string dump(const RegionGraph& rg)
{
    std::ostringstream os;
    for (int r = 0; r < rg.size(); ++r) {
        const auto& reg = rg.region(r);
        os << r << ' ' << to_string(reg.level) << " scope=";
        for (std::size_t i = 0; i < reg.ring.size(); ++i)
            os << (i ? "," : "") << reg.ring[i];
        os << " kappa=" << reg.kappa << " parents=";
        auto parents = rg.parents(r);
        std::sort(parents.begin(), parents.end());
        if (parents.empty())
            os << '-';
        for (std::size_t i = 0; i < parents.size(); ++i)
            os << (i ? "," : "") << parents[i];
        os << '\n';
    }
    return os.str();
}

} // namespace loopsrg
