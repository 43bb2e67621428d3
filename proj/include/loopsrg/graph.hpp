#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace loopsrg {

using Vertex = int;

// Undirected edge, always stored with u < v.
struct Edge {
    Vertex u = 0;
    Vertex v = 0;

    auto operator<=>(const Edge&) const = default;
};

// Normalizes the endpoint order. Throws ValidationError on u == v.
Edge make_edge(Vertex a, Vertex b);

std::string to_string(const Edge& e);

// Fixed-size bit vector used for edge-incidence vectors over GF(2).
class EdgeBits {
public:
    EdgeBits() = default;
    explicit EdgeBits(std::size_t size);

    std::size_t size() const { return size_; }

    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
    void set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
    void reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

    bool any() const;
    std::size_t count() const;
    // Index of the lowest set bit, or size() when empty.
    std::size_t first() const;
    std::vector<std::size_t> indices() const;

    EdgeBits& operator^=(const EdgeBits& other);
    EdgeBits& operator&=(const EdgeBits& other);
    EdgeBits& operator|=(const EdgeBits& other);
    // this &= ~other
    EdgeBits& subtract(const EdgeBits& other);

    bool operator==(const EdgeBits& other) const = default;

    std::span<const std::uint64_t> words() const { return words_; }

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

// Rank over GF(2) by Gaussian elimination on copies of the rows.
std::size_t gf2_rank(std::span<const EdgeBits> rows);

struct Neighbor {
    Vertex vertex;
    int edge;
};

// Simple undirected graph over vertices [0, n). Edges are kept in canonical
// (lexicographic) order and their position in that order is the edge id used
// by every incidence vector.
class Graph {
public:
    Graph() = default;
    Graph(int n_vertices, std::vector<Edge> edges);

    int num_vertices() const { return n_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int id) const { return edges_[id]; }

    // Neighbors sorted by vertex index.
    std::span<const Neighbor> neighbors(Vertex v) const { return adjacency_[v]; }
    int degree(Vertex v) const { return static_cast<int>(adjacency_[v].size()); }
    int max_degree() const;

    std::optional<int> edge_id(Vertex a, Vertex b) const;
    bool has_edge(Vertex a, Vertex b) const { return edge_id(a, b).has_value(); }

    // Component label per vertex, labels numbered in order of lowest vertex.
    std::vector<int> component_labels() const;
    int num_components() const;
    bool is_connected() const { return num_components() <= 1; }

    EdgeBits all_edges() const;
    // Incidence vector of an edge list; throws if an edge is not in the graph.
    EdgeBits edge_bits(std::span<const Edge> edges) const;

    // Subgraph on the same vertex set containing the edges flagged in bits.
    Graph edge_subgraph(const EdgeBits& bits) const;

    bool operator==(const Graph& other) const { return n_ == other.n_ && edges_ == other.edges_; }

private:
    int n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<Neighbor>> adjacency_;
};

Graph complete_graph(int n);
// Vertex (r, c) has index r * cols + c.
Graph grid_graph(int rows, int cols);
Graph path_graph(int n);
Graph cycle_graph(int n);
// Hub is vertex 0, rim vertices 1..rim in cyclic order.
Graph wheel_graph(int rim);

// Simple cycle: a closed vertex sequence with no repeated vertex.
class Cycle {
public:
    Cycle() = default;
    // Validates length >= 3 and distinct vertices; edge membership in a host
    // graph is checked where the cycle is used.
    explicit Cycle(std::vector<Vertex> vertices);

    const std::vector<Vertex>& vertices() const { return vertices_; }
    // Sorted, canonical.
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t length() const { return vertices_.size(); }

    bool same_edges(const Cycle& other) const { return edges_ == other.edges_; }

private:
    std::vector<Vertex> vertices_;
    std::vector<Edge> edges_;
};

std::string to_string(const Cycle& c);

// Cycle incidence vectors over g; throws ValidationError when a cycle uses a
// non-edge.
std::vector<EdgeBits> incidence_vectors(std::span<const Cycle> cycles, const Graph& g);

class SpanningTree {
public:
    // Validates that edges form a spanning tree of g.
    SpanningTree(const Graph& g, std::vector<Edge> edges);

    const std::vector<Edge>& edges() const { return edges_; }
    // Membership over g's canonical edge order.
    const EdgeBits& bits() const { return bits_; }

private:
    std::vector<Edge> edges_;
    EdgeBits bits_;
};

// Random spanning tree by Wilson's loop-erased random walk (uniform over all
// spanning trees). Throws ValidationError naming one vertex per component
// when g is disconnected.
SpanningTree spanning_tree(const Graph& g, std::uint64_t seed);

// Deterministic spanning tree containing the given forest edges, completed
// with the remaining edges in canonical order.
SpanningTree spanning_tree_containing(const Graph& g, std::span<const Edge> forest);

// |E| - |V| + 1; g must be connected.
int cycle_space_dim(const Graph& g);

// |cycles| equals the cycle-space dimension (|E| - |V| + #components) and
// the incidence vectors are independent over GF(2).
bool is_cycle_basis(std::span<const Cycle> cycles, const Graph& g);

// Edges lying in exactly one of the cycles. The vertex count is the larger of
// n_vertices and one past the highest vertex used.
Graph unique_edge_graph(std::span<const Cycle> cycles, int n_vertices = 0);

bool contains_cycle(const Graph& g);

// Minimum-hop path from s to t using only allowed edges; ties go to the
// lowest-numbered neighbor during the breadth-first search.
std::vector<Vertex> shortest_path_restricted(const Graph& g, const EdgeBits& allowed, Vertex s, Vertex t);

} // namespace loopsrg
