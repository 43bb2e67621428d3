#include "ring.hpp"

#include <cmath>
#include <limits>

namespace loopsrg::detail {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

RingPotential::RingPotential(std::size_t length) : unary(length, {0.0, 0.0}), pair(ring_slots(length), {0.0, 0.0, 0.0, 0.0}) {}

std::size_t ring_slots(std::size_t length)
{
    if (length <= 1)
        return 0;
    return length == 2 ? 1 : length;
}

double log_sum_exp(double a, double b)
{
    if (a == kNegInf)
        return b;
    if (b == kNegInf)
        return a;
    return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

std::array<double, 4> ring_slot_log_marginal(const RingPotential& p, std::size_t slot)
{
    const std::size_t L = p.length();
    std::array<double, 4> out{};
    if (L == 2) {
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                out[a * 2 + b] = p.unary[0][a] + p.unary[1][b] + p.pair[0][a * 2 + b];
        return out;
    }
    const std::size_t k = slot;
    const std::size_t next = (k + 1) % L;
    const std::size_t prev = (k + L - 1) % L;
    for (int b = 0; b < 2; ++b) {
        // alpha over the current position's state, walking k+1 -> k-1.
        std::array<double, 2> alpha{kNegInf, kNegInf};
        alpha[b] = p.unary[next][b];
        for (std::size_t t = 1; t + 1 < L; ++t) {
            const std::size_t j = (k + t) % L;
            const std::size_t q = (j + 1) % L;
            std::array<double, 2> nxt{};
            for (int z = 0; z < 2; ++z)
                nxt[z] = log_sum_exp(alpha[0] + p.pair[j][0 * 2 + z], alpha[1] + p.pair[j][1 * 2 + z]) + p.unary[q][z];
            alpha = nxt;
        }
        for (int a = 0; a < 2; ++a) {
            const double closing = log_sum_exp(alpha[0] + p.pair[prev][0 * 2 + a], alpha[1] + p.pair[prev][1 * 2 + a]);
            out[a * 2 + b] = p.unary[k][a] + p.pair[k][a * 2 + b] + closing;
        }
    }
    return out;
}

std::array<double, 2> ring_node_log_marginal(const RingPotential& p, std::size_t pos)
{
    const std::size_t L = p.length();
    if (L == 1)
        return p.unary[0];
    if (L == 2) {
        auto t = ring_slot_log_marginal(p, 0);
        if (pos == 0)
            return {log_sum_exp(t[0], t[1]), log_sum_exp(t[2], t[3])};
        return {log_sum_exp(t[0], t[2]), log_sum_exp(t[1], t[3])};
    }
    auto t = ring_slot_log_marginal(p, pos);
    return {log_sum_exp(t[0], t[1]), log_sum_exp(t[2], t[3])};
}

double ring_log_partition(const RingPotential& p)
{
    auto m = ring_node_log_marginal(p, 0);
    return log_sum_exp(m[0], m[1]);
}

std::vector<double> ring_log_table(const RingPotential& p)
{
    const std::size_t L = p.length();
    const std::size_t slots = ring_slots(L);
    std::vector<double> table(std::size_t{1} << L, 0.0);
    for (std::size_t idx = 0; idx < table.size(); ++idx) {
        auto bit = [&](std::size_t pos) { return static_cast<int>((idx >> (L - 1 - pos)) & 1U); };
        double v = 0.0;
        for (std::size_t pos = 0; pos < L; ++pos)
            v += p.unary[pos][bit(pos)];
        for (std::size_t k = 0; k < slots; ++k)
            v += p.pair[k][bit(k) * 2 + bit((k + 1) % L)];
        table[idx] = v;
    }
    return table;
}

} // namespace loopsrg::detail
