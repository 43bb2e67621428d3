#include "loopsrg/markov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "loopsrg/error.hpp"
#include "loopsrg/rng.hpp"

namespace loopsrg {

MarkovNet::MarkovNet(Graph graph, std::vector<double> h, std::vector<double> w)
    : graph_(std::move(graph)), h_(std::move(h)), w_(std::move(w))
{
    if (static_cast<int>(h_.size()) != graph_.num_vertices())
        throw ValidationError("expected " + std::to_string(graph_.num_vertices()) + " fields, got " + std::to_string(h_.size()));
    if (static_cast<int>(w_.size()) != graph_.num_edges())
        throw ValidationError("expected " + std::to_string(graph_.num_edges()) + " couplings, got " + std::to_string(w_.size()));
    for (double x : h_)
        if (!std::isfinite(x))
            throw ValidationError("non-finite field");
    for (double x : w_)
        if (!std::isfinite(x))
            throw ValidationError("non-finite coupling");
}

std::array<double, 2> MarkovNet::unary_table(Vertex i) const
{
    return {std::exp(h_[i]), std::exp(-h_[i])};
}

std::array<double, 4> MarkovNet::pair_table(int edge) const
{
    const double same = std::exp(w_[edge]);
    const double diff = std::exp(-w_[edge]);
    return {same, diff, diff, same};
}

MarkovNet random_instance(const Graph& g, double sigma_h, double sigma_w, std::uint64_t seed)
{
    if (sigma_h < 0.0 || sigma_w < 0.0 || !std::isfinite(sigma_h) || !std::isfinite(sigma_w))
        throw ValidationError("standard deviations must be finite and non-negative");
    Rng rng(seed);
    auto draw = [&](double sigma) {
        const double z = rng.normal();
        return sigma == 0.0 ? 0.0 : sigma * z;
    };
    std::vector<double> h(g.num_vertices());
    for (auto& x : h)
        x = draw(sigma_h);
    std::vector<double> w(g.num_edges());
    for (auto& x : w)
        x = draw(sigma_w);
    return MarkovNet(g, std::move(h), std::move(w));
}

MarkovNet delete_offtree_factors(const MarkovNet& m, const SpanningTree& t)
{
    if (t.bits().size() != static_cast<std::size_t>(m.graph().num_edges()))
        throw ValidationError("delete_offtree_factors: tree does not span the model graph");
    for (const auto& e : t.edges())
        if (!m.graph().has_edge(e.u, e.v))
            throw ValidationError("delete_offtree_factors: tree edge " + to_string(e) + " not in model");
    std::vector<double> w = m.couplings();
    for (std::size_t id = 0; id < w.size(); ++id)
        if (!t.bits().test(id))
            w[id] = 0.0;
    return MarkovNet(m.graph(), m.fields(), std::move(w));
}

Graph random_ktree(int n, int k, std::uint64_t seed)
{
    if (k < 1 || n < k + 1)
        throw ValidationError("random_ktree needs k >= 1 and n >= k + 1");
    Rng rng(seed);
    std::vector<Edge> edges;
    for (Vertex u = 0; u <= k; ++u)
        for (Vertex v = u + 1; v <= k; ++v)
            edges.push_back({u, v});
    std::vector<std::vector<Vertex>> cliques;
    for (Vertex skip = 0; skip <= k; ++skip) {
        std::vector<Vertex> c;
        for (Vertex v = 0; v <= k; ++v)
            if (v != skip)
                c.push_back(v);
        cliques.push_back(std::move(c));
    }
    for (Vertex v = k + 1; v < n; ++v) {
        const std::vector<Vertex> base = cliques[rng.below(cliques.size())];
        for (Vertex u : base)
            edges.push_back({u, v});
        for (std::size_t drop = 0; drop < base.size(); ++drop) {
            std::vector<Vertex> c = base;
            c[drop] = v;
            cliques.push_back(std::move(c));
        }
    }
    return Graph(n, std::move(edges));
}

namespace {

bool connected_without(const std::vector<std::vector<Vertex>>& adj, Vertex a, Vertex b)
{
    // Is b reachable from a once edge (a, b) is removed?
    std::vector<bool> seen(adj.size(), false);
    std::vector<Vertex> stack{a};
    seen[a] = true;
    while (!stack.empty()) {
        Vertex v = stack.back();
        stack.pop_back();
        for (Vertex u : adj[v]) {
            if ((v == a && u == b) || (v == b && u == a) || seen[u])
                continue;
            if (u == b)
                return true;
            seen[u] = true;
            stack.push_back(u);
        }
    }
    return false;
}

} // namespace

Graph gen_partial_ktree(int n, int k, double connectivity, std::uint64_t seed)
{
    if (k < 2 || n <= k + 1)
        throw ValidationError("partial K-tree needs K >= 2 and n > K + 1");
    if (!(connectivity > 0.0 && connectivity <= 1.0))
        throw ValidationError("connectivity must lie in (0, 1]");
    Graph ktree = random_ktree(n, k, seed);
    std::vector<std::vector<Vertex>> adj(n);
    for (const auto& e : ktree.edges()) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    auto max_degree = [&] {
        std::size_t best = 0;
        for (const auto& list : adj)
            best = std::max(best, list.size());
        return best;
    };
    Rng rng(derive_seed(seed, 1));
    const std::size_t budget = 50 * ktree.edges().size() + 1000;
    std::size_t attempts = 0;
    while (static_cast<double>(max_degree()) / n >= connectivity) {
        if (attempts++ >= budget)
            throw ValidationError("partial K-tree: connectivity " + std::to_string(connectivity) +
                                  " unattainable, reached " + std::to_string(static_cast<double>(max_degree()) / n));
        std::size_t total_degree = 0;
        for (const auto& list : adj)
            total_degree += list.size();
        std::uint64_t pick = rng.below(total_degree);
        Vertex v = 0;
        while (pick >= adj[v].size()) {
            pick -= adj[v].size();
            ++v;
        }
        const std::size_t slot = rng.below(adj[v].size());
        const Vertex u = adj[v][slot];
        if (!connected_without(adj, v, u))
            continue;
        adj[v].erase(adj[v].begin() + static_cast<std::ptrdiff_t>(slot));
        adj[u].erase(std::find(adj[u].begin(), adj[u].end(), v));
    }
    std::vector<Edge> edges;
    for (Vertex v = 0; v < n; ++v)
        for (Vertex u : adj[v])
            if (v < u)
                edges.push_back({v, u});
    return Graph(n, std::move(edges));
}

Graph gen_grid_longrange(int rows, int cols, int extra, std::uint64_t seed)
{
    Graph grid = grid_graph(rows, cols);
    const long long n = grid.num_vertices();
    const long long capacity = n * (n - 1) / 2 - grid.num_edges();
    if (extra < 0 || extra > capacity)
        throw ValidationError("cannot add " + std::to_string(extra) + " long-range edges (at most " +
                              std::to_string(capacity) + " available)");
    Rng rng(seed);
    std::vector<Edge> edges = grid.edges();
    std::vector<std::vector<bool>> present(n, std::vector<bool>(n, false));
    for (const auto& e : edges)
        present[e.u][e.v] = present[e.v][e.u] = true;
    for (int added = 0; added < extra;) {
        const auto u = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n)));
        const auto v = static_cast<Vertex>(rng.below(static_cast<std::uint64_t>(n)));
        if (u == v || present[u][v])
            continue;
        present[u][v] = present[v][u] = true;
        edges.push_back(make_edge(u, v));
        ++added;
    }
    return Graph(static_cast<int>(n), std::move(edges));
}

} // namespace loopsrg
