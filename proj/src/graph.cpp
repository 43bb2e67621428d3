#include "loopsrg/graph.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <sstream>

#include "loopsrg/error.hpp"
#include "loopsrg/rng.hpp"
#include "union_find.hpp"

namespace loopsrg {

Edge make_edge(Vertex a, Vertex b)
{
    if (a == b)
        throw ValidationError("self-loop at vertex " + std::to_string(a));
    return a < b ? Edge{a, b} : Edge{b, a};
}

std::string to_string(const Edge& e)
{
    return "(" + std::to_string(e.u) + "," + std::to_string(e.v) + ")";
}

// ---------------------------------------------------------------------------
// EdgeBits

EdgeBits::EdgeBits(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

bool EdgeBits::any() const
{
    return std::any_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w != 0; });
}

std::size_t EdgeBits::count() const
{
    std::size_t total = 0;
    for (auto w : words_)
        total += static_cast<std::size_t>(std::popcount(w));
    return total;
}

std::size_t EdgeBits::first() const
{
    for (std::size_t i = 0; i < words_.size(); ++i)
        if (words_[i] != 0)
            return i * 64 + static_cast<std::size_t>(std::countr_zero(words_[i]));
    return size_;
}

std::vector<std::size_t> EdgeBits::indices() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < words_.size(); ++i) {
        std::uint64_t w = words_[i];
        while (w != 0) {
            out.push_back(i * 64 + static_cast<std::size_t>(std::countr_zero(w)));
            w &= w - 1;
        }
    }
    return out;
}

EdgeBits& EdgeBits::operator^=(const EdgeBits& other)
{
    for (std::size_t i = 0; i < words_.size(); ++i)
        words_[i] ^= other.words_[i];
    return *this;
}

EdgeBits& EdgeBits::operator&=(const EdgeBits& other)
{
    for (std::size_t i = 0; i < words_.size(); ++i)
        words_[i] &= other.words_[i];
    return *this;
}

EdgeBits& EdgeBits::operator|=(const EdgeBits& other)
{
    for (std::size_t i = 0; i < words_.size(); ++i)
        words_[i] |= other.words_[i];
    return *this;
}

EdgeBits& EdgeBits::subtract(const EdgeBits& other)
{
    for (std::size_t i = 0; i < words_.size(); ++i)
        words_[i] &= ~other.words_[i];
    return *this;
}

std::size_t gf2_rank(std::span<const EdgeBits> rows)
{
    std::vector<EdgeBits> m(rows.begin(), rows.end());
    std::size_t rank = 0;
    for (std::size_t r = 0; r < m.size(); ++r) {
        std::size_t pivot = m[r].first();
        if (pivot == m[r].size())
            continue;
        ++rank;
        for (std::size_t k = r + 1; k < m.size(); ++k)
            if (m[k].test(pivot))
                m[k] ^= m[r];
    }
    return rank;
}

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(int n_vertices, std::vector<Edge> edges) : n_(n_vertices), edges_(std::move(edges))
{
    if (n_ < 0)
        throw ValidationError("negative vertex count");
    for (auto& e : edges_) {
        e = make_edge(e.u, e.v);
        if (e.u < 0 || e.v >= n_)
            throw ValidationError("edge " + to_string(e) + " out of range for " + std::to_string(n_) + " vertices");
    }
    std::sort(edges_.begin(), edges_.end());
    auto dup = std::adjacent_find(edges_.begin(), edges_.end());
    if (dup != edges_.end())
        throw ValidationError("duplicate edge " + to_string(*dup));

    adjacency_.assign(n_, {});
    for (int id = 0; id < num_edges(); ++id) {
        adjacency_[edges_[id].u].push_back({edges_[id].v, id});
        adjacency_[edges_[id].v].push_back({edges_[id].u, id});
    }
    for (auto& list : adjacency_)
        std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.vertex < b.vertex; });
}

int Graph::max_degree() const
{
    int best = 0;
    for (Vertex v = 0; v < n_; ++v)
        best = std::max(best, degree(v));
    return best;
}

std::optional<int> Graph::edge_id(Vertex a, Vertex b) const
{
    if (a == b || a < 0 || b < 0 || a >= n_ || b >= n_)
        return std::nullopt;
    const Edge key = make_edge(a, b);
    auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key)
        return std::nullopt;
    return static_cast<int>(it - edges_.begin());
}

std::vector<int> Graph::component_labels() const
{
    std::vector<int> label(n_, -1);
    int next = 0;
    std::vector<Vertex> stack;
    for (Vertex root = 0; root < n_; ++root) {
        if (label[root] >= 0)
            continue;
        label[root] = next;
        stack.push_back(root);
        while (!stack.empty()) {
            Vertex v = stack.back();
            stack.pop_back();
            for (const auto& nb : adjacency_[v]) {
                if (label[nb.vertex] < 0) {
                    label[nb.vertex] = next;
                    stack.push_back(nb.vertex);
                }
            }
        }
        ++next;
    }
    return label;
}

int Graph::num_components() const
{
    auto labels = component_labels();
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

EdgeBits Graph::all_edges() const
{
    EdgeBits bits(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i)
        bits.set(i);
    return bits;
}

EdgeBits Graph::edge_bits(std::span<const Edge> edges) const
{
    EdgeBits bits(edges_.size());
    for (const auto& e : edges) {
        auto id = edge_id(e.u, e.v);
        if (!id)
            throw ValidationError("edge " + to_string(e) + " is not in the graph");
        bits.set(static_cast<std::size_t>(*id));
    }
    return bits;
}

Graph Graph::edge_subgraph(const EdgeBits& bits) const
{
    std::vector<Edge> kept;
    for (auto id : bits.indices())
        kept.push_back(edges_[id]);
    return Graph(n_, std::move(kept));
}

Graph complete_graph(int n)
{
    std::vector<Edge> edges;
    for (Vertex u = 0; u < n; ++u)
        for (Vertex v = u + 1; v < n; ++v)
            edges.push_back({u, v});
    return Graph(n, std::move(edges));
}

Graph grid_graph(int rows, int cols)
{
    if (rows < 1 || cols < 1)
        throw ValidationError("grid dimensions must be positive");
    std::vector<Edge> edges;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const Vertex v = r * cols + c;
            if (c + 1 < cols)
                edges.push_back({v, v + 1});
            if (r + 1 < rows)
                edges.push_back({v, v + cols});
        }
    }
    return Graph(rows * cols, std::move(edges));
}

Graph path_graph(int n)
{
    std::vector<Edge> edges;
    for (Vertex v = 0; v + 1 < n; ++v)
        edges.push_back({v, v + 1});
    return Graph(n, std::move(edges));
}

Graph cycle_graph(int n)
{
    if (n < 3)
        throw ValidationError("cycle graph needs at least 3 vertices");
    auto edges = path_graph(n).edges();
    edges.push_back({0, n - 1});
    return Graph(n, std::move(edges));
}

Graph wheel_graph(int rim)
{
    if (rim < 3)
        throw ValidationError("wheel needs a rim of at least 3 vertices");
    std::vector<Edge> edges;
    for (Vertex v = 1; v <= rim; ++v) {
        edges.push_back({0, v});
        edges.push_back(make_edge(v, v == rim ? 1 : v + 1));
    }
    return Graph(rim + 1, std::move(edges));
}

// ---------------------------------------------------------------------------
// Cycle

Cycle::Cycle(std::vector<Vertex> vertices) : vertices_(std::move(vertices))
{
    if (vertices_.size() < 3)
        throw ValidationError("cycle needs at least 3 vertices");
    auto sorted = vertices_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("cycle repeats a vertex: not simple");
    if (sorted.front() < 0)
        throw ValidationError("negative vertex in cycle");
    for (std::size_t i = 0; i < vertices_.size(); ++i)
        edges_.push_back(make_edge(vertices_[i], vertices_[(i + 1) % vertices_.size()]));
    std::sort(edges_.begin(), edges_.end());
}

std::string to_string(const Cycle& c)
{
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < c.vertices().size(); ++i)
        os << (i ? "," : "") << c.vertices()[i];
    os << ")";
    return os.str();
}

std::vector<EdgeBits> incidence_vectors(std::span<const Cycle> cycles, const Graph& g)
{
    std::vector<EdgeBits> out;
    out.reserve(cycles.size());
    for (const auto& c : cycles) {
        try {
            out.push_back(g.edge_bits(c.edges()));
        } catch (const ValidationError& e) {
            throw ValidationError("cycle " + to_string(c) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spanning trees

SpanningTree::SpanningTree(const Graph& g, std::vector<Edge> edges) : edges_(std::move(edges))
{
    std::sort(edges_.begin(), edges_.end());
    bits_ = g.edge_bits(edges_);
    if (bits_.count() != edges_.size())
        throw ValidationError("spanning tree repeats an edge");
    if (g.num_vertices() > 0 && static_cast<int>(edges_.size()) != g.num_vertices() - 1)
        throw ValidationError("spanning tree must have n - 1 = " + std::to_string(g.num_vertices() - 1) + " edges, got " +
                              std::to_string(edges_.size()));
    detail::UnionFind uf(g.num_vertices());
    for (const auto& e : edges_)
        if (!uf.unite(e.u, e.v))
            throw ValidationError("spanning tree edges contain a cycle through " + to_string(e));
}

namespace {

void require_connected(const Graph& g, const char* what)
{
    auto labels = g.component_labels();
    if (g.num_vertices() == 0 || *std::max_element(labels.begin(), labels.end()) == 0)
        return;
    std::vector<Vertex> representative;
    for (Vertex v = 0; v < g.num_vertices(); ++v)
        if (labels[v] == static_cast<int>(representative.size()))
            representative.push_back(v);
    std::string msg = std::string(what) + ": graph is disconnected; component representatives:";
    for (auto v : representative)
        msg += " " + std::to_string(v);
    throw ValidationError(msg);
}

} // namespace

SpanningTree spanning_tree(const Graph& g, std::uint64_t seed)
{
    require_connected(g, "spanning_tree");
    const int n = g.num_vertices();
    if (n == 0)
        return SpanningTree(g, {});
    Rng rng(seed);
    std::vector<bool> in_tree(n, false);
    std::vector<int> next_edge(n, -1);
    in_tree[rng.below(static_cast<std::uint64_t>(n))] = true;
    std::vector<Edge> edges;
    for (Vertex start = 0; start < n; ++start) {
        Vertex v = start;
        while (!in_tree[v]) {
            auto nbrs = g.neighbors(v);
            const auto& pick = nbrs[rng.below(nbrs.size())];
            next_edge[v] = pick.edge;
            v = pick.vertex;
        }
        v = start;
        while (!in_tree[v]) {
            in_tree[v] = true;
            const Edge& e = g.edge(next_edge[v]);
            edges.push_back(e);
            v = e.u == v ? e.v : e.u;
        }
    }
    return SpanningTree(g, std::move(edges));
}

SpanningTree spanning_tree_containing(const Graph& g, std::span<const Edge> forest)
{
    require_connected(g, "spanning_tree_containing");
    detail::UnionFind uf(g.num_vertices());
    std::vector<Edge> edges;
    for (const auto& e : forest) {
        if (!g.has_edge(e.u, e.v))
            throw ValidationError("forest edge " + to_string(e) + " is not in the graph");
        if (!uf.unite(e.u, e.v))
            throw ValidationError("forest edges contain a cycle through " + to_string(e));
        edges.push_back(e);
    }
    for (const auto& e : g.edges())
        if (uf.unite(e.u, e.v))
            edges.push_back(e);
    return SpanningTree(g, std::move(edges));
}

int cycle_space_dim(const Graph& g)
{
    require_connected(g, "cycle_space_dim");
    return g.num_vertices() == 0 ? 0 : g.num_edges() - g.num_vertices() + 1;
}

bool is_cycle_basis(std::span<const Cycle> cycles, const Graph& g)
{
    const int dim = g.num_edges() - g.num_vertices() + g.num_components();
    if (static_cast<int>(cycles.size()) != dim)
        return false;
    std::vector<EdgeBits> rows;
    try {
        rows = incidence_vectors(cycles, g);
    } catch (const ValidationError&) {
        return false;
    }
    return gf2_rank(rows) == cycles.size();
}

Graph unique_edge_graph(std::span<const Cycle> cycles, int n_vertices)
{
    std::vector<Edge> all;
    for (const auto& c : cycles) {
        all.insert(all.end(), c.edges().begin(), c.edges().end());
        for (auto v : c.vertices())
            n_vertices = std::max(n_vertices, v + 1);
    }
    std::sort(all.begin(), all.end());
    std::vector<Edge> unique;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j] == all[i])
            ++j;
        if (j - i == 1)
            unique.push_back(all[i]);
        i = j;
    }
    return Graph(n_vertices, std::move(unique));
}

bool contains_cycle(const Graph& g)
{
    detail::UnionFind uf(g.num_vertices());
    for (const auto& e : g.edges())
        if (!uf.unite(e.u, e.v))
            return true;
    return false;
}

std::vector<Vertex> shortest_path_restricted(const Graph& g, const EdgeBits& allowed, Vertex s, Vertex t)
{
    const int n = g.num_vertices();
    if (s < 0 || t < 0 || s >= n || t >= n)
        throw ValidationError("path endpoints out of range");
    std::vector<Vertex> parent(n, -1);
    std::vector<bool> seen(n, false);
    std::deque<Vertex> queue{s};
    seen[s] = true;
    while (!queue.empty() && !seen[t]) {
        Vertex v = queue.front();
        queue.pop_front();
        for (const auto& nb : g.neighbors(v)) {
            if (seen[nb.vertex] || !allowed.test(static_cast<std::size_t>(nb.edge)))
                continue;
            seen[nb.vertex] = true;
            parent[nb.vertex] = v;
            queue.push_back(nb.vertex);
        }
    }
    if (!seen[t])
        throw ValidationError("no path from " + std::to_string(s) + " to " + std::to_string(t) + " on allowed edges");
    std::vector<Vertex> path;
    for (Vertex v = t; v != -1; v = parent[v])
        path.push_back(v);
    std::reverse(path.begin(), path.end());
    return path;
}

} // namespace loopsrg
