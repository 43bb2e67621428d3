#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>

#include "loopsrg/error.hpp"
#include "loopsrg/inference.hpp"

namespace loopsrg {

namespace {

constexpr int kHardCap = 40;
constexpr std::uint64_t kRefreshPeriod = 4096;

struct Enumerator {
    const MarkovNet& m;
    int n;
    std::vector<int> s; // spins, +1 for state 0
    double energy = 0.0;

    explicit Enumerator(const MarkovNet& model) : m(model), n(model.num_vars()), s(n, 1) {}

    double full_energy() const
    {
        double e = 0.0;
        for (int i = 0; i < n; ++i)
            e += m.fields()[i] * s[i];
        const auto& edges = m.graph().edges();
        for (std::size_t k = 0; k < edges.size(); ++k)
            e += m.couplings()[k] * s[edges[k].u] * s[edges[k].v];
        return e;
    }

    // Visits all 2^n states in Gray-code order.
    template <class Visit>
    void run(Visit&& visit)
    {
        std::fill(s.begin(), s.end(), 1);
        energy = full_energy();
        visit();
        const std::uint64_t total = std::uint64_t{1} << n;
        for (std::uint64_t step = 1; step < total; ++step) {
            const int i = std::countr_zero(step);
            double local = m.fields()[i];
            for (const auto& nb : m.graph().neighbors(i))
                local += m.couplings()[nb.edge] * s[nb.vertex];
            energy -= 2.0 * s[i] * local;
            s[i] = -s[i];
            if (step % kRefreshPeriod == 0)
                energy = full_energy();
            visit();
        }
    }
};

} // namespace

int exact_cap_from_env()
{
    const char* raw = std::getenv("LOOPSRG_EXACT_CAP");
    if (!raw || !*raw)
        return kDefaultExactCap;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (*end != '\0' || v <= 0)
        return kDefaultExactCap;
    return static_cast<int>(std::min<long>(v, kHardCap));
}

ExactResult exact_brute_force(const MarkovNet& m, int max_vars)
{
    const int n = m.num_vars();
    if (n > max_vars || n > kHardCap)
        throw ValidationError("exact inference over " + std::to_string(n) + " variables exceeds the cap of " +
                              std::to_string(std::min(max_vars, kHardCap)) +
                              "; decompose the model or raise LOOPSRG_EXACT_CAP");
    const Graph& g = m.graph();
    Enumerator en(m);

    double top = -std::numeric_limits<double>::infinity();
    en.run([&] { top = std::max(top, en.energy); });

    double z = 0.0;
    std::vector<double> p0(n, 0.0);
    std::vector<double> p00(g.num_edges(), 0.0);
    en.run([&] {
        const double w = std::exp(en.energy - top);
        z += w;
        for (int i = 0; i < n; ++i)
            if (en.s[i] > 0)
                p0[i] += w;
        for (int k = 0; k < g.num_edges(); ++k)
            if (en.s[g.edge(k).u] > 0 && en.s[g.edge(k).v] > 0)
                p00[k] += w;
    });

    ExactResult r;
    r.log_z = top + std::log(z);
    r.node_marginals.resize(n);
    for (int i = 0; i < n; ++i) {
        const double a = p0[i] / z;
        r.node_marginals[i] = {a, 1.0 - a};
    }
    r.edge_marginals.resize(g.num_edges());
    for (int k = 0; k < g.num_edges(); ++k) {
        const double a = r.node_marginals[g.edge(k).u][0];
        const double b = r.node_marginals[g.edge(k).v][0];
        const double q = p00[k] / z;
        r.edge_marginals[k] = {q, std::max(0.0, a - q), std::max(0.0, b - q), std::max(0.0, 1.0 - a - b + q)};
    }
    return r;
}

} // namespace loopsrg
