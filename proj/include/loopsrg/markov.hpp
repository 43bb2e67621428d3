#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "loopsrg/graph.hpp"

namespace loopsrg {

// Binary pairwise Markov network
//
//   p(x) = 1/Z prod_i f_i(x_i) prod_(i,j) f_ij(x_i, x_j)
//
// with f_i = [e^{h_i}, e^{-h_i}] and f_ij(a, b) = e^{w_ij} when a == b and
// e^{-w_ij} otherwise. State 0 selects the first row of each table.
class MarkovNet {
public:
    MarkovNet() = default;
    // One field per vertex, one coupling per edge in canonical edge order.
    MarkovNet(Graph graph, std::vector<double> h, std::vector<double> w);

    const Graph& graph() const { return graph_; }
    int num_vars() const { return graph_.num_vertices(); }
    const std::vector<double>& fields() const { return h_; }
    const std::vector<double>& couplings() const { return w_; }

    // log f_i(x), indexed by state.
    std::array<double, 2> log_unary(Vertex i) const { return {h_[i], -h_[i]}; }
    // log f_ij over (x_u, x_v) of edge id, indexed x_u * 2 + x_v.
    std::array<double, 4> log_pair(int edge) const
    {
        const double w = w_[edge];
        return {w, -w, -w, w};
    }
    std::array<double, 2> unary_table(Vertex i) const;
    std::array<double, 4> pair_table(int edge) const;

private:
    Graph graph_;
    std::vector<double> h_;
    std::vector<double> w_;
};

// i.i.d. N(0, sigma_h^2) fields in vertex order, then N(0, sigma_w^2)
// couplings in canonical edge order.
MarkovNet random_instance(const Graph& g, double sigma_h, double sigma_w, std::uint64_t seed);

// Same graph with zero coupling on every edge outside t.
MarkovNet delete_offtree_factors(const MarkovNet& m, const SpanningTree& t);

// Random K-tree: a (K+1)-clique grown by attaching each new vertex to a
// uniformly chosen existing K-clique.
Graph random_ktree(int n, int k, std::uint64_t seed);

// Random K-tree thinned by degree-proportional edge deletions (skipping
// bridges) until max_degree / n < connectivity.
Graph gen_partial_ktree(int n, int k, double connectivity, std::uint64_t seed);

// rows x cols grid plus `extra` distinct random non-grid edges.
Graph gen_grid_longrange(int rows, int cols, int extra, std::uint64_t seed);

// --- instance files -------------------------------------------------------

struct Instance {
    MarkovNet model;
    nlohmann::json meta = nlohmann::json::object();
};

// JSON document {"n", "edges": [[u, v, w], ...], "h": [...], "meta": {...}}
// with reals printed to 17 significant digits.
std::string format_instance(const MarkovNet& m, const nlohmann::json& meta = nlohmann::json::object());
Instance parse_instance(const std::string& text, const std::string& origin = "<text>");

void write_instance(const MarkovNet& m, const std::string& path, const nlohmann::json& meta = nlohmann::json::object());
Instance read_instance(const std::string& path);

// %.17g; parses back to the identical double.
std::string format_real(double x);

} // namespace loopsrg
