#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace loopsrg::detail {

// Log-potential of a pairwise model whose interaction graph is a ring over
// positions 0..L-1. Slot k couples positions k and k+1 (mod L); a ring of
// two positions has one slot and a ring of one position has none. Pair
// tables are indexed x_k * 2 + x_{k+1}.
struct RingPotential {
    std::vector<std::array<double, 2>> unary;
    std::vector<std::array<double, 4>> pair;

    explicit RingPotential(std::size_t length);
    std::size_t length() const { return unary.size(); }
};

std::size_t ring_slots(std::size_t length);

double log_sum_exp(double a, double b);

// Unnormalized log-marginal of (x_k, x_{k+1}) for slot k, computed by a
// transfer-matrix sweep around the rest of the ring: O(L).
std::array<double, 4> ring_slot_log_marginal(const RingPotential& p, std::size_t slot);

// Unnormalized log-marginal of one position.
std::array<double, 2> ring_node_log_marginal(const RingPotential& p, std::size_t pos);

double ring_log_partition(const RingPotential& p);

// Brute-force unnormalized log-table over all 2^L joint states; position 0 is
// the most significant bit. Used by tests and small-region dumps.
std::vector<double> ring_log_table(const RingPotential& p);

} // namespace loopsrg::detail
