#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loopsrg/graph.hpp"

namespace loopsrg {

// An ordered set of cycles forming a basis of the host graph's cycle space.
// The host is held by value; bases in this project are small.
class CycleBasis {
public:
    // Throws ValidationError (with the rank deficit) unless cycles is a basis
    // of host.
    CycleBasis(Graph host, std::vector<Cycle> cycles);

    const Graph& host() const { return host_; }
    const std::vector<Cycle>& cycles() const { return cycles_; }
    const std::vector<EdgeBits>& incidence() const { return incidence_; }
    std::size_t size() const { return cycles_.size(); }

private:
    Graph host_;
    std::vector<Cycle> cycles_;
    std::vector<EdgeBits> incidence_;
};

// Result of greedy unique-edge peeling. `residual` lists the indices of the
// cycles left when no further cycle could be peeled (empty on success).
struct PeelResult {
    bool ok = false;
    std::vector<std::size_t> residual;
};

enum class TrVerdict { tree_robust, not_tree_robust, not_fundamental };

std::string to_string(TrVerdict v);

struct TrCertificate {
    TrVerdict verdict = TrVerdict::tree_robust;
    // not_tree_robust: cycle indices whose unique edge graph is acyclic.
    // not_fundamental: the unpeelable residual.
    std::vector<std::size_t> witness;
};

struct SampledTrResult {
    bool probably_tree_robust = true;
    std::size_t trees = 0;
    std::size_t failures = 0;
    double pass_fraction = 1.0;
    // First spanning tree for which the basis is not tree exact.
    std::optional<SpanningTree> counterexample;
};

struct SingularityResult {
    bool singular = false;
    // Cycle indices in which every edge lies in at least two cycles.
    std::vector<std::size_t> witness;
};

// --- constructions --------------------------------------------------------

// One cycle per off-tree edge: the edge plus the tree path between its ends.
CycleBasis fcb_from_tree(const Graph& g, const SpanningTree& t);

// Triangles (root, i, j) for every edge (i, j) avoiding root. The root must
// be adjacent to every other vertex.
CycleBasis star_basis(const Graph& g, Vertex root);

// Unit squares of a rows x cols grid in row-major order; each face is traced
// (r,c) -> (r,c+1) -> (r+1,c+1) -> (r+1,c).
CycleBasis grid_face_basis(int rows, int cols);

// Caller-supplied faces of a planar embedding, validated as a basis only.
CycleBasis face_basis_from_list(const Graph& g, std::vector<Cycle> faces);

// Ear-based extension of a core basis to a fundamental basis of g. The core's
// host graph is the core subgraph (same vertex count, edges a subset of g's);
// without a core the first simple cycle through the lowest canonical non-bridge
// edge seeds the construction. Deterministic: unused edges are taken in
// order of (lowest visited vertex, lowest neighbor) and every path search
// prefers lower-numbered neighbors.
CycleBasis construct_basis(const Graph& g, const std::optional<CycleBasis>& core = std::nullopt);

// Union of bases of singly connected components; must be a basis of g.
CycleBasis combine_bases(std::span<const CycleBasis> component_bases, const Graph& g);

// --- verification ---------------------------------------------------------

PeelResult is_fundamental(const CycleBasis& b);

// Peeling restricted to unique edges off the tree; the last remaining cycle
// is unconstrained.
PeelResult is_tree_exact(const CycleBasis& b, const SpanningTree& t);

// Checks the unique edge graph of every non-empty subset (2^mu of them).
// Throws ValidationError when the basis size exceeds max_cycles. The witness
// is the failing subset with the smallest bitmask rank.
TrCertificate is_tree_robust_exhaustive(const CycleBasis& b, std::size_t max_cycles = 20);

// Monte-Carlo check of tree exactness against n_trees uniform spanning trees.
SampledTrResult is_tree_robust_sampled(const CycleBasis& b, std::size_t n_trees, std::uint64_t seed);

// Loop sets need not be bases here.
SingularityResult is_singular_loopset(std::span<const Cycle> cycles);

// Edges of the witness subset that appear in exactly one of its cycles.
Graph witness_unique_edges(const CycleBasis& b, std::span<const std::size_t> subset);

// --- basis files ----------------------------------------------------------

// One cycle per line as whitespace-separated vertex indices; '#' starts a
// comment.
std::vector<Cycle> parse_cycles(const std::string& text, const std::string& origin = "<text>");
std::string format_cycles(std::span<const Cycle> cycles);
std::vector<Cycle> read_cycles(const std::string& path);
void write_cycles(std::span<const Cycle> cycles, const std::string& path);

} // namespace loopsrg
