#pragma once

#include <cstdint>
#include <optional>
#include <random>

namespace loopsrg {

// Seeded random source with portable derived distributions.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The standard distributions are not, so bounded integers use
// rejection sampling on the raw 64-bit output and normals use the Marsaglia
// polar method. Identical seeds give identical draws on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    // Uniform double in [0, 1) with 53 random bits.
    double uniform();

    // Standard normal draw (Marsaglia polar; the second variate is cached).
    double normal();

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

// SplitMix64 finalizer applied to seed + stream; used to give independent
// sub-streams (graph structure vs. potentials, sequence vs. instances).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace loopsrg
