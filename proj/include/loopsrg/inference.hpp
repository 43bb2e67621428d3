#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "loopsrg/markov.hpp"
#include "loopsrg/region_graph.hpp"

namespace loopsrg {

enum class GbpSolver {
    parent_to_child,
    // Convergent minimization of the same free energy; see run_double_loop.
    double_loop,
    // parent_to_child, then double_loop from scratch if that did not converge.
    automatic,
};

struct GbpOptions {
    // new_log = damping * old_log + (1 - damping) * computed_log
    double damping = 0.5;
    // Sweeps for parent_to_child, outer steps for double_loop.
    int max_iters = 1000;
    // On the largest absolute change of a log-message within one sweep
    // (parent_to_child) or of an inner log-belief across an outer step
    // (double_loop).
    double tolerance = 1e-9;
    GbpSolver solver = GbpSolver::automatic;
    int inner_iters = 200;
};

const char* solver_name(GbpSolver s);

// One log-domain table per region arc, over the child's ring order (two
// entries for a node child, four for an edge child indexed x_u * 2 + x_v).
// Tables are kept at zero mean; all-zero is the uniform message.
using Messages = std::vector<std::vector<double>>;

// Normalized belief of one region, held in structured form: the ring
// log-potential it is proportional to plus its node and slot marginals.
struct RegionBelief {
    std::vector<Vertex> ring;
    std::vector<std::array<double, 2>> log_unary;
    std::vector<std::array<double, 4>> log_pair;
    double log_norm = 0.0;
    std::vector<std::array<double, 2>> node;
    std::vector<std::array<double, 4>> pair;

    // Beliefs of one- or two-variable regions given as probability tables.
    static RegionBelief from_table(std::vector<Vertex> ring, std::span<const double> probs);

    // Marginal of variable v, which must lie in the ring.
    std::array<double, 2> marginal(Vertex v) const;
    // Marginal over (x_a, x_b) indexed x_a * 2 + x_b; (a, b) must be adjacent
    // in the ring.
    std::array<double, 4> marginal(Vertex a, Vertex b) const;
    // Full joint over the ring order, position 0 most significant. Small
    // regions only.
    std::vector<double> table() const;
    // sum_x b(x) ln b(x)
    double neg_entropy() const;
};

struct BeliefState {
    // Parent-to-child messages; empty when the double loop produced the state.
    Messages messages;
    std::vector<RegionBelief> beliefs;
    bool converged = false;
    // Total sweeps, counting inner sweeps of the double loop.
    int iterations = 0;
    GbpSolver solver = GbpSolver::parent_to_child;
    double max_residual = 0.0;
    double log_z_estimate = 0.0;
    std::vector<std::array<double, 2>> node_marginals;
};

// Parent-to-child GBP on region graphs whose regions are rings (Loop-SRGs
// and Bethe graphs) and whose child scopes are single variables or ring
// edges of the parent.
//
// Belief of R: the factors of R's down-set times every message entering the
// down-set from outside it. The update for P -> R is the value making P's
// belief marginalize to R's belief given all other messages:
//
//   m_{P->R} = sum_{x_P \ x_R} [factors in D(P) \ D(R)] [messages into D(P)
//              from outside whose target is not in D(R)]
//              / [messages into D(R) from D(P) \ D(R), other than P -> R]
class ParentToChild {
public:
    ParentToChild(const RegionGraph& rg, const MarkovNet& m);
    ~ParentToChild();
    ParentToChild(ParentToChild&&) noexcept;
    ParentToChild& operator=(ParentToChild&&) noexcept;

    Messages uniform_messages() const;
    std::vector<double> update_message(const Messages& messages, int arc) const;
    RegionBelief region_belief(const Messages& messages, int region) const;
    // Arcs ordered by parent depth, then parent id, then child id.
    const std::vector<int>& schedule() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// A sweep that produces a non-finite message is undone and ends the run
// unconverged. warm_start applies to the parent-to-child stage only.
BeliefState run_gbp(const RegionGraph& rg, const MarkovNet& m, const GbpOptions& opts = {},
                    const Messages* warm_start = nullptr);

// Double-loop minimization of the region free energy over consistent
// beliefs. Parentless regions are outer regions, the rest inner; each
// factor moves to one outer ancestor of its region. Entropies of inner
// regions with negative counting numbers are linearized around the current
// inner beliefs, extrapolated along the previous outer step (outer step); the remaining convex problem is solved by
// block coordinate ascent on its dual, one inner region at a time (inner
// sweeps). Its stationary points are those of parent-to-child GBP.
BeliefState run_double_loop(const RegionGraph& rg, const MarkovNet& m, const GbpOptions& opts = {});

// GBP on the Bethe region graph.
BeliefState run_bp(const MarkovNet& m, const GbpOptions& opts = {});

RegionBelief region_belief(const RegionGraph& rg, const Messages& messages, const MarkovNet& m, int region);
std::vector<double> update_message(const RegionGraph& rg, const Messages& messages, const MarkovNet& m, int arc);

struct FreeEnergy {
    double free_energy = 0.0;
    double log_z = 0.0;
};

// F = sum_R kappa_R sum_x b_R (ln b_R - ln f_R), with f_R the factors of R's
// down-set. Throws ValidationError when factor coverage is unbalanced.
FreeEnergy region_free_energy(const RegionGraph& rg, std::span<const RegionBelief> beliefs, const MarkovNet& m);

// max over arcs P -> R of max |sum_{x_P \ x_R} b_P - b_R|.
double consistency_residual(const RegionGraph& rg, std::span<const RegionBelief> beliefs);

struct ExactResult {
    double log_z = 0.0;
    std::vector<std::array<double, 2>> node_marginals;
    // Indexed x_u * 2 + x_v for canonical edge (u, v).
    std::vector<std::array<double, 4>> edge_marginals;
};

constexpr int kDefaultExactCap = 24;

// LOOPSRG_EXACT_CAP when set to a positive integer, else kDefaultExactCap.
int exact_cap_from_env();

// Enumerates all 2^n states in Gray-code order. Throws ValidationError when
// n exceeds max_vars.
ExactResult exact_brute_force(const MarkovNet& m, int max_vars = kDefaultExactCap);

} // namespace loopsrg
