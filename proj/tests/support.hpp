#pragma once

// Shared generators and independent oracles for the test suites. Nothing
// here calls the code under test for the quantity being checked.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <numeric>
#include <vector>

#include "loopsrg/graph.hpp"
#include "loopsrg/markov.hpp"
#include "loopsrg/rng.hpp"

namespace testsupport {

using loopsrg::Cycle;
using loopsrg::Edge;
using loopsrg::Graph;
using loopsrg::MarkovNet;
using loopsrg::Rng;
using loopsrg::Vertex;

// Connected graph: random attachment tree plus `extra` random chords.
inline Graph random_connected_graph(int n, int extra, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<Edge> edges;
    std::vector<std::vector<bool>> present(n, std::vector<bool>(n, false));
    for (int v = 1; v < n; ++v) {
        const int u = static_cast<int>(rng.below(v));
        edges.push_back({u, v});
        present[u][v] = present[v][u] = true;
    }
    const int capacity = n * (n - 1) / 2 - (n - 1);
    extra = std::min(extra, capacity);
    while (extra > 0) {
        const int a = static_cast<int>(rng.below(n));
        const int b = static_cast<int>(rng.below(n));
        if (a == b || present[a][b])
            continue;
        present[a][b] = present[b][a] = true;
        edges.push_back({std::min(a, b), std::max(a, b)});
        --extra;
    }
    return Graph(n, edges);
}

inline MarkovNet random_model(const Graph& g, double sh, double sw, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<double> h(g.num_vertices()), w(g.num_edges());
    for (auto& x : h)
        x = sh * (2.0 * rng.uniform() - 1.0);
    for (auto& x : w)
        x = sw * (2.0 * rng.uniform() - 1.0);
    return MarkovNet(g, h, w);
}

inline MarkovNet uniform_model(const Graph& g)
{
    return MarkovNet(g, std::vector<double>(g.num_vertices(), 0.0), std::vector<double>(g.num_edges(), 0.0));
}

// Plain enumeration with direct products of the potential tables.
struct Brute {
    double log_z = 0.0;
    std::vector<std::array<double, 2>> node;
    std::vector<std::array<double, 4>> pair; // per canonical edge
};

inline Brute brute_force(const MarkovNet& m)
{
    const int n = m.num_vars();
    const Graph& g = m.graph();
    std::vector<double> weight(std::size_t{1} << n);
    double top = -1e300;
    for (std::size_t x = 0; x < weight.size(); ++x) {
        double e = 0.0;
        for (int i = 0; i < n; ++i)
            e += std::log(m.unary_table(i)[(x >> i) & 1U]);
        for (int k = 0; k < g.num_edges(); ++k)
            e += std::log(m.pair_table(k)[((x >> g.edge(k).u) & 1U) * 2 + ((x >> g.edge(k).v) & 1U)]);
        weight[x] = e;
        top = std::max(top, e);
    }
    Brute b;
    b.node.assign(n, {0.0, 0.0});
    b.pair.assign(g.num_edges(), {0.0, 0.0, 0.0, 0.0});
    double z = 0.0;
    for (std::size_t x = 0; x < weight.size(); ++x) {
        const double p = std::exp(weight[x] - top);
        z += p;
        for (int i = 0; i < n; ++i)
            b.node[i][(x >> i) & 1U] += p;
        for (int k = 0; k < g.num_edges(); ++k)
            b.pair[k][((x >> g.edge(k).u) & 1U) * 2 + ((x >> g.edge(k).v) & 1U)] += p;
    }
    for (auto& a : b.node)
        for (auto& v : a)
            v /= z;
    for (auto& a : b.pair)
        for (auto& v : a)
            v /= z;
    b.log_z = top + std::log(z);
    return b;
}

// Loopy BP on the pairwise factor graph in probability space:
//   m_{i->j}(x_j) ∝ sum_{x_i} f_i(x_i) f_ij(x_i, x_j) prod_{k in N(i)\j} m_{k->i}(x_i)
// with the classical Bethe estimate of log Z.
struct DirectBp {
    std::vector<std::array<double, 2>> node;
    double log_z = 0.0;
    bool converged = false;
};

inline DirectBp direct_bp(const MarkovNet& m, int max_iters = 5000, double tol = 1e-13)
{
    const Graph& g = m.graph();
    const int n = m.num_vars();
    // msg[2k] is u->v on edge k, msg[2k+1] is v->u.
    std::vector<std::array<double, 2>> msg(2 * g.num_edges(), {0.5, 0.5});
    auto pair_at = [&](int k, Vertex from, int xf, int xt) {
        const auto t = m.pair_table(k);
        return from == g.edge(k).u ? t[xf * 2 + xt] : t[xt * 2 + xf];
    };
    auto incoming = [&](Vertex i, int skip_edge) {
        std::array<double, 2> acc = m.unary_table(i);
        for (const auto& nb : g.neighbors(i)) {
            if (nb.edge == skip_edge)
                continue;
            const int id = g.edge(nb.edge).u == i ? 2 * nb.edge + 1 : 2 * nb.edge;
            acc[0] *= msg[id][0];
            acc[1] *= msg[id][1];
        }
        return acc;
    };
    DirectBp out;
    for (int it = 0; it < max_iters; ++it) {
        double delta = 0.0;
        for (int k = 0; k < g.num_edges(); ++k) {
            for (int dir = 0; dir < 2; ++dir) {
                const Vertex from = dir == 0 ? g.edge(k).u : g.edge(k).v;
                const auto pre = incoming(from, k);
                std::array<double, 2> next{};
                for (int xt = 0; xt < 2; ++xt)
                    next[xt] = pre[0] * pair_at(k, from, 0, xt) + pre[1] * pair_at(k, from, 1, xt);
                const double s = next[0] + next[1];
                next[0] /= s;
                next[1] /= s;
                // Half-step averaging keeps oscillating cases converging.
                for (int x = 0; x < 2; ++x) {
                    const double v = 0.5 * msg[2 * k + dir][x] + 0.5 * next[x];
                    delta = std::max(delta, std::abs(v - msg[2 * k + dir][x]));
                    msg[2 * k + dir][x] = v;
                }
            }
        }
        if (delta < tol) {
            out.converged = true;
            break;
        }
    }
    out.node.resize(n);
    std::vector<std::array<double, 2>> node_b(n);
    for (Vertex i = 0; i < n; ++i) {
        auto b = incoming(i, -1);
        const double s = b[0] + b[1];
        node_b[i] = {b[0] / s, b[1] / s};
        out.node[i] = node_b[i];
    }
    // Bethe free energy: sum_edges [b_ij ln(b_ij / f_ij f_i f_j)] - sum_i (d_i - 1) b_i ln(b_i / f_i)
    double F = 0.0;
    for (int k = 0; k < g.num_edges(); ++k) {
        const Vertex u = g.edge(k).u, v = g.edge(k).v;
        const auto bu = incoming(u, k);
        const auto bv = incoming(v, k);
        std::array<double, 4> b{};
        double s = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int c = 0; c < 2; ++c) {
                b[a * 2 + c] = bu[a] * bv[c] * m.pair_table(k)[a * 2 + c];
                s += b[a * 2 + c];
            }
        for (int a = 0; a < 2; ++a)
            for (int c = 0; c < 2; ++c) {
                const double p = b[a * 2 + c] / s;
                F += p * (std::log(p) - std::log(m.pair_table(k)[a * 2 + c] * m.unary_table(u)[a] * m.unary_table(v)[c]));
            }
    }
    for (Vertex i = 0; i < n; ++i) {
        const double d = g.degree(i);
        for (int x = 0; x < 2; ++x)
            F -= (d - 1.0) * node_b[i][x] * (std::log(node_b[i][x]) - std::log(m.unary_table(i)[x]));
    }
    out.log_z = -F;
    return out;
}

// Definition-level tree exactness: some ordering of the cycles gives every
// cycle after the first an off-tree edge absent from all earlier cycles.
inline bool tree_exact_by_orderings(const std::vector<Cycle>& cycles, const std::vector<Edge>& tree_edges)
{
    std::vector<int> perm(cycles.size());
    std::iota(perm.begin(), perm.end(), 0);
    auto in_tree = [&](const Edge& e) { return std::find(tree_edges.begin(), tree_edges.end(), e) != tree_edges.end(); };
    do {
        bool ok = true;
        for (std::size_t i = 1; i < perm.size() && ok; ++i) {
            bool found = false;
            for (const auto& e : cycles[perm[i]].edges()) {
                if (in_tree(e))
                    continue;
                bool earlier = false;
                for (std::size_t j = 0; j < i && !earlier; ++j) {
                    const auto& ej = cycles[perm[j]].edges();
                    earlier = std::find(ej.begin(), ej.end(), e) != ej.end();
                }
                if (!earlier) {
                    found = true;
                    break;
                }
            }
            ok = found;
        }
        if (ok)
            return true;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return false;
}

// Symmetric difference of two cycles when it is a single simple cycle.
inline std::optional<Cycle> cycle_from_sum(const Cycle& a, const Cycle& b)
{
    std::vector<Edge> sum;
    std::set_symmetric_difference(a.edges().begin(), a.edges().end(), b.edges().begin(), b.edges().end(),
                                  std::back_inserter(sum));
    if (sum.size() < 3)
        return std::nullopt;
    std::map<Vertex, std::vector<Vertex>> adj;
    for (const auto& e : sum) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    for (const auto& [v, nb] : adj)
        if (nb.size() != 2)
            return std::nullopt;
    std::vector<Vertex> walk{adj.begin()->first};
    Vertex prev = -1;
    for (;;) {
        const Vertex cur = walk.back();
        const Vertex next = adj[cur][0] != prev ? adj[cur][0] : adj[cur][1];
        if (next == walk.front())
            break;
        prev = cur;
        walk.push_back(next);
    }
    if (walk.size() != adj.size())
        return std::nullopt;
    return Cycle(walk);
}

// Spearman rank correlation of y against its index (average ranks on ties).
inline double spearman(const std::vector<double>& y)
{
    const std::size_t n = y.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && y[idx[j + 1]] == y[idx[i]])
            ++j;
        for (std::size_t k = i; k <= j; ++k)
            rank[idx[k]] = 0.5 * static_cast<double>(i + j);
        i = j + 1;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += static_cast<double>(i);
        my += rank[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - mx;
        const double dy = rank[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

inline std::vector<Cycle> three_loop_example()
{
    // 2x3 grid: two faces and the outer boundary.
    return {Cycle({0, 1, 4, 3}), Cycle({1, 2, 5, 4}), Cycle({0, 1, 2, 5, 4, 3})};
}

inline Graph chorded_grid_example()
{
    // 2x3 grid 0 1 2 / 3 4 5 plus chords (0,5) and (2,3).
    auto edges = loopsrg::grid_graph(2, 3).edges();
    edges.push_back({0, 5});
    edges.push_back({2, 3});
    return Graph(6, edges);
}

} // namespace testsupport
