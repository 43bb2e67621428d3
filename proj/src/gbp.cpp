#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "loopsrg/error.hpp"
#include "loopsrg/inference.hpp"
#include "ring.hpp"

namespace loopsrg {

using detail::log_sum_exp;
using detail::RingPotential;

namespace {

enum class Source { unary_factor, pair_factor, message };

// One log-potential term placed on a ring: a position (single-variable
// scope) or a slot (two-variable scope, possibly transposed).
struct Term {
    Source source;
    int index;
    bool on_slot;
    int place;
    bool transposed;
};

int ring_position(const std::vector<Vertex>& ring, Vertex v)
{
    for (std::size_t i = 0; i < ring.size(); ++i)
        if (ring[i] == v)
            return static_cast<int>(i);
    return -1;
}

// Slot k with {ring[k], ring[k+1]} == {a, b}; sets `transposed` when
// ring[k] == b.
int ring_slot(const std::vector<Vertex>& ring, Vertex a, Vertex b, bool& transposed)
{
    const std::size_t slots = detail::ring_slots(ring.size());
    for (std::size_t k = 0; k < slots; ++k) {
        const Vertex x = ring[k];
        const Vertex y = ring[(k + 1) % ring.size()];
        if (x == a && y == b) {
            transposed = false;
            return static_cast<int>(k);
        }
        if (x == b && y == a) {
            transposed = true;
            return static_cast<int>(k);
        }
    }
    return -1;
}

std::array<double, 4> transpose(const std::array<double, 4>& t) { return {t[0], t[2], t[1], t[3]}; }

std::string ring_text(const std::vector<Vertex>& ring)
{
    std::string s = "(";
    for (std::size_t i = 0; i < ring.size(); ++i)
        s += (i ? "," : "") + std::to_string(ring[i]);
    return s + ")";
}

void normalize_zero_mean(std::vector<double>& t)
{
    if (std::all_of(t.begin(), t.end(), [&](double x) { return x == t.front(); })) {
        std::fill(t.begin(), t.end(), 0.0);
        return;
    }
    double mean = 0.0;
    for (double x : t)
        mean += x;
    mean /= static_cast<double>(t.size());
    for (double& x : t)
        x -= mean;
}

std::array<double, 2> normalized(const std::array<double, 2>& log_t)
{
    const double z = log_sum_exp(log_t[0], log_t[1]);
    return {std::exp(log_t[0] - z), std::exp(log_t[1] - z)};
}

std::array<double, 4> normalized(const std::array<double, 4>& log_t)
{
    const double z = log_sum_exp(log_sum_exp(log_t[0], log_t[1]), log_sum_exp(log_t[2], log_t[3]));
    return {std::exp(log_t[0] - z), std::exp(log_t[1] - z), std::exp(log_t[2] - z), std::exp(log_t[3] - z)};
}

RegionBelief belief_from_potential(const std::vector<Vertex>& ring, const RingPotential& p)
{
    RegionBelief b;
    b.ring = ring;
    b.log_unary = p.unary;
    b.log_pair = p.pair;
    b.log_norm = detail::ring_log_partition(p);
    const std::size_t L = ring.size();
    if (L == 1) {
        b.node = {normalized(p.unary[0])};
        return b;
    }
    if (L == 2) {
        const auto pr = normalized(detail::ring_slot_log_marginal(p, 0));
        b.pair = {pr};
        b.node = {{pr[0] + pr[1], pr[2] + pr[3]}, {pr[0] + pr[2], pr[1] + pr[3]}};
        return b;
    }
    b.pair.resize(L);
    b.node.resize(L);
    for (std::size_t k = 0; k < L; ++k) {
        b.pair[k] = normalized(detail::ring_slot_log_marginal(p, k));
        b.node[k] = {b.pair[k][0] + b.pair[k][1], b.pair[k][2] + b.pair[k][3]};
    }
    return b;
}

} // namespace

// --- RegionBelief -----------------------------------------------------------

RegionBelief RegionBelief::from_table(std::vector<Vertex> ring, std::span<const double> probs)
{
    if (ring.empty() || ring.size() > 2)
        throw ValidationError("RegionBelief::from_table: only one- or two-variable regions");
    if (probs.size() != (std::size_t{1} << ring.size()))
        throw ValidationError("RegionBelief::from_table: table size does not match the region");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw ValidationError("RegionBelief::from_table: probabilities must be finite and non-negative");
        total += p;
    }
    if (!(total > 0.0))
        throw ValidationError("RegionBelief::from_table: table sums to zero");
    RegionBelief b;
    b.ring = std::move(ring);
    if (b.ring.size() == 1) {
        b.node = {{probs[0] / total, probs[1] / total}};
        b.log_unary = {{std::log(b.node[0][0]), std::log(b.node[0][1])}};
        return b;
    }
    std::array<double, 4> p{};
    for (int k = 0; k < 4; ++k)
        p[k] = probs[k] / total;
    b.pair = {p};
    b.node = {{p[0] + p[1], p[2] + p[3]}, {p[0] + p[2], p[1] + p[3]}};
    b.log_unary = {{0.0, 0.0}, {0.0, 0.0}};
    b.log_pair = {{std::log(p[0]), std::log(p[1]), std::log(p[2]), std::log(p[3])}};
    return b;
}

std::array<double, 2> RegionBelief::marginal(Vertex v) const
{
    const int pos = ring_position(ring, v);
    if (pos < 0)
        throw ValidationError("variable " + std::to_string(v) + " is not in region " + ring_text(ring));
    return node[pos];
}

std::array<double, 4> RegionBelief::marginal(Vertex a, Vertex b) const
{
    bool transposed = false;
    const int slot = ring_slot(ring, a, b, transposed);
    if (slot < 0)
        throw ValidationError("(" + std::to_string(a) + "," + std::to_string(b) + ") is not a structure edge of region " +
                              ring_text(ring));
    return transposed ? transpose(pair[slot]) : pair[slot];
}

std::vector<double> RegionBelief::table() const
{
    if (ring.size() > 24)
        throw ValidationError("RegionBelief::table: region too large to tabulate");
    RingPotential p(ring.size());
    p.unary = log_unary;
    p.pair = log_pair;
    auto t = detail::ring_log_table(p);
    for (double& x : t)
        x = std::exp(x - log_norm);
    return t;
}

double RegionBelief::neg_entropy() const
{
    // b = exp(theta - log_norm), so sum b ln b = E_b[theta] - log_norm.
    double e = 0.0;
    for (std::size_t i = 0; i < log_unary.size(); ++i)
        for (int x = 0; x < 2; ++x)
            if (node[i][x] > 0.0)
                e += node[i][x] * log_unary[i][x];
    for (std::size_t k = 0; k < log_pair.size(); ++k)
        for (int x = 0; x < 4; ++x)
            if (pair[k][x] > 0.0)
                e += pair[k][x] * log_pair[k][x];
    return e - log_norm;
}

// --- ParentToChild ----------------------------------------------------------

struct ParentToChild::Impl {
    const RegionGraph* rg;
    const MarkovNet* m;
    std::vector<std::vector<Term>> belief_terms;
    std::vector<std::vector<Term>> numerator;   // on the parent's ring
    std::vector<std::vector<Term>> denominator; // on the child's ring
    std::vector<Term> child_in_parent;
    std::vector<int> schedule;

    Term place(Source source, int index, const std::vector<Vertex>& scope, const std::vector<Vertex>& ring) const
    {
        Term t{source, index, false, -1, false};
        if (scope.size() == 1) {
            t.place = ring_position(ring, scope[0]);
        } else if (scope.size() == 2) {
            t.on_slot = true;
            t.place = ring_slot(ring, scope[0], scope[1], t.transposed);
        }
        if (t.place < 0)
            throw ValidationError("GBP: scope " + ring_text(scope) + " is not a node or structure edge of region " +
                                  ring_text(ring));
        return t;
    }

    Term place_message(int arc, const std::vector<Vertex>& ring) const
    {
        return place(Source::message, arc, rg->region(rg->arcs()[arc].child).ring, ring);
    }

    void add(RingPotential& p, const Term& t, const Messages& msgs) const
    {
        if (!t.on_slot) {
            std::array<double, 2> v{};
            if (t.source == Source::unary_factor)
                v = m->log_unary(t.index);
            else
                v = {msgs[t.index][0], msgs[t.index][1]};
            p.unary[t.place][0] += v[0];
            p.unary[t.place][1] += v[1];
            return;
        }
        std::array<double, 4> v{};
        if (t.source == Source::pair_factor)
            v = m->log_pair(t.index);
        else
            v = {msgs[t.index][0], msgs[t.index][1], msgs[t.index][2], msgs[t.index][3]};
        if (t.transposed)
            v = transpose(v);
        for (int k = 0; k < 4; ++k)
            p.pair[t.place][k] += v[k];
    }

    RingPotential potential(const std::vector<Vertex>& ring, const std::vector<Term>& terms, const Messages& msgs) const
    {
        RingPotential p(ring.size());
        for (const auto& t : terms)
            add(p, t, msgs);
        return p;
    }
};

ParentToChild::ParentToChild(const RegionGraph& rg, const MarkovNet& m) : impl_(std::make_unique<Impl>())
{
    Impl& I = *impl_;
    I.rg = &rg;
    I.m = &m;
    const int R = rg.size();
    const auto& arcs = rg.arcs();
    const Graph& g = m.graph();

    for (const auto& reg : rg.regions())
        if (reg.ring.empty() || reg.ring.size() != reg.scope.size())
            throw ValidationError("GBP: region " + ring_text(reg.ring) + " has no ring structure");

    const auto down = down_sets(rg);
    std::vector<std::vector<bool>> in(R, std::vector<bool>(R, false));
    for (int r = 0; r < R; ++r)
        for (int d : down[r])
            in[r][d] = true;

    auto factor_terms = [&](int r, const std::vector<Vertex>& ring, std::vector<Term>& out, const std::vector<bool>* exclude) {
        for (int d : down[r]) {
            if (exclude && (*exclude)[d])
                continue;
            for (Vertex v : rg.region(d).unary_factors)
                out.push_back(I.place(Source::unary_factor, v, {v}, ring));
            for (int e : rg.region(d).pair_factors)
                out.push_back(I.place(Source::pair_factor, e, {g.edge(e).u, g.edge(e).v}, ring));
        }
    };

    I.belief_terms.resize(R);
    for (int r = 0; r < R; ++r) {
        const auto& ring = rg.region(r).ring;
        factor_terms(r, ring, I.belief_terms[r], nullptr);
        for (int a = 0; a < static_cast<int>(arcs.size()); ++a)
            if (in[r][arcs[a].child] && !in[r][arcs[a].parent])
                I.belief_terms[r].push_back(I.place_message(a, ring));
    }

    I.numerator.resize(arcs.size());
    I.denominator.resize(arcs.size());
    I.child_in_parent.resize(arcs.size());
    for (int a = 0; a < static_cast<int>(arcs.size()); ++a) {
        const int P = arcs[a].parent;
        const int C = arcs[a].child;
        const auto& pring = rg.region(P).ring;
        const auto& cring = rg.region(C).ring;
        if (cring.size() > 2)
            throw ValidationError("GBP: child region " + ring_text(cring) + " has more than two variables");
        I.child_in_parent[a] = I.place(Source::message, a, cring, pring);
        factor_terms(P, pring, I.numerator[a], &in[C]);
        for (int b = 0; b < static_cast<int>(arcs.size()); ++b) {
            const int A = arcs[b].parent;
            const int B = arcs[b].child;
            if (in[P][B] && !in[P][A] && !in[C][B])
                I.numerator[a].push_back(I.place_message(b, pring));
            if (b != a && in[C][B] && !in[C][A] && in[P][A])
                I.denominator[a].push_back(I.place_message(b, cring));
        }
    }

    // Depth = longest path from a parentless region.
    std::vector<int> depth(R, 0);
    for (int pass = 0; pass < R; ++pass) {
        bool changed = false;
        for (const auto& arc : arcs)
            if (depth[arc.child] < depth[arc.parent] + 1) {
                depth[arc.child] = depth[arc.parent] + 1;
                changed = true;
            }
        if (!changed)
            break;
    }
    I.schedule.resize(arcs.size());
    for (int a = 0; a < static_cast<int>(arcs.size()); ++a)
        I.schedule[a] = a;
    std::sort(I.schedule.begin(), I.schedule.end(), [&](int x, int y) {
        const auto& ax = arcs[x];
        const auto& ay = arcs[y];
        return std::tuple(depth[ax.parent], ax.parent, ax.child) < std::tuple(depth[ay.parent], ay.parent, ay.child);
    });
}

ParentToChild::~ParentToChild() = default;
ParentToChild::ParentToChild(ParentToChild&&) noexcept = default;
ParentToChild& ParentToChild::operator=(ParentToChild&&) noexcept = default;

Messages ParentToChild::uniform_messages() const
{
    Messages msgs;
    for (const auto& arc : impl_->rg->arcs())
        msgs.emplace_back(std::size_t{1} << impl_->rg->region(arc.child).ring.size(), 0.0);
    return msgs;
}

const std::vector<int>& ParentToChild::schedule() const { return impl_->schedule; }

std::vector<double> ParentToChild::update_message(const Messages& messages, int arc) const
{
    const Impl& I = *impl_;
    const auto& a = I.rg->arcs()[arc];
    const auto& pring = I.rg->region(a.parent).ring;
    const auto& cring = I.rg->region(a.child).ring;
    const RingPotential p = I.potential(pring, I.numerator[arc], messages);
    const Term& at = I.child_in_parent[arc];

    std::vector<double> out;
    if (!at.on_slot) {
        const auto t = detail::ring_node_log_marginal(p, at.place);
        out = {t[0], t[1]};
    } else {
        auto t = detail::ring_slot_log_marginal(p, at.place);
        if (at.transposed)
            t = transpose(t);
        out = {t[0], t[1], t[2], t[3]};
    }
    const RingPotential d = I.potential(cring, I.denominator[arc], messages);
    const auto dt = detail::ring_log_table(d);
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] -= dt[k];
    normalize_zero_mean(out);
    return out;
}

RegionBelief ParentToChild::region_belief(const Messages& messages, int region) const
{
    const Impl& I = *impl_;
    const auto& ring = I.rg->region(region).ring;
    return belief_from_potential(ring, I.potential(ring, I.belief_terms[region], messages));
}

// --- double loop ------------------------------------------------------------

namespace {

struct DoubleLoop {
    using Table = std::array<double, 4>;
    struct Link {
        int outer;
        Term at;
        Table lambda;
    };
    struct Inner {
        int region;
        int kappa;
        double kappa_convex;
        std::size_t size;
        std::vector<Link> links;
        Table q;
        Table rho;
        // One outer ancestor and a zero counting number: the multiplier
        // stays zero and the belief is that ancestor's marginal.
        bool passive() const { return links.size() == 1 && kappa == 0; }
    };

    const RegionGraph& rg;
    std::vector<int> outer;
    std::vector<RingPotential> base;
    std::vector<RingPotential> pot;
    std::vector<Inner> inner;
    std::vector<Table> prev_q;

    DoubleLoop(const RegionGraph& graph, const MarkovNet& m) : rg(graph)
    {
        const int R = rg.size();
        const Graph& g = m.graph();
        std::vector<std::vector<int>> parents(R);
        for (const auto& a : rg.arcs())
            parents[a.child].push_back(a.parent);
        std::vector<int> outer_of(R, -1);
        for (int r = 0; r < R; ++r) {
            const auto& reg = rg.region(r);
            if (reg.ring.empty() || reg.ring.size() != reg.scope.size())
                throw ValidationError("GBP: region " + ring_text(reg.ring) + " has no ring structure");
            if (parents[r].empty()) {
                outer_of[r] = static_cast<int>(outer.size());
                outer.push_back(r);
                base.emplace_back(reg.ring.size());
            }
        }

        auto outer_ancestors = [&](int r) {
            std::vector<int> found;
            std::vector<bool> seen(R, false);
            std::vector<int> stack{r};
            seen[r] = true;
            while (!stack.empty()) {
                const int x = stack.back();
                stack.pop_back();
                if (outer_of[x] >= 0)
                    found.push_back(outer_of[x]);
                for (int p : parents[x])
                    if (!seen[p]) {
                        seen[p] = true;
                        stack.push_back(p);
                    }
            }
            std::sort(found.begin(), found.end());
            return found;
        };

        for (int r = 0; r < R; ++r) {
            const auto& reg = rg.region(r);
            const auto anc = outer_ancestors(r);
            const int home = anc.front();
            RingPotential& p = base[home];
            const auto& ring = rg.region(outer[home]).ring;
            for (Vertex v : reg.unary_factors) {
                const int pos = ring_position(ring, v);
                if (pos < 0)
                    throw ValidationError("GBP: variable " + std::to_string(v) + " is not in region " + ring_text(ring));
                const auto t = m.log_unary(v);
                p.unary[pos][0] += t[0];
                p.unary[pos][1] += t[1];
            }
            for (int e : reg.pair_factors) {
                bool tr = false;
                const int slot = ring_slot(ring, g.edge(e).u, g.edge(e).v, tr);
                if (slot < 0)
                    throw ValidationError("GBP: edge factor " + std::to_string(e) + " is not a structure edge of region " +
                                          ring_text(ring));
                auto t = m.log_pair(e);
                if (tr)
                    t = transpose(t);
                for (int k = 0; k < 4; ++k)
                    p.pair[slot][k] += t[k];
            }
            if (outer_of[r] >= 0)
                continue;
            if (reg.ring.size() > 2)
                throw ValidationError("GBP: inner region " + ring_text(reg.ring) + " has more than two variables");
            const std::size_t size = std::size_t{1} << reg.ring.size();
            Inner in{r, reg.kappa, static_cast<double>(std::max(reg.kappa, 0)), size, {}, {}, {}};
            for (int o : anc) {
                const auto& oring = rg.region(outer[o]).ring;
                Term t{Source::message, 0, false, -1, false};
                if (reg.ring.size() == 1) {
                    t.place = ring_position(oring, reg.ring[0]);
                } else {
                    t.on_slot = true;
                    t.place = ring_slot(oring, reg.ring[0], reg.ring[1], t.transposed);
                }
                if (t.place < 0)
                    throw ValidationError("GBP: scope " + ring_text(reg.ring) + " is not a node or structure edge of region " +
                                          ring_text(oring));
                in.links.push_back({o, t, {}});
            }
            inner.push_back(std::move(in));
        }

        rebuild();
        for (auto& in : inner)
            in.q = marginal(pot[in.links[0].outer], in.links[0].at);
    }

    // Normalized log-marginal of the scope placed at `at`.
    static Table marginal(const RingPotential& p, const Term& at)
    {
        if (!at.on_slot) {
            const auto t = detail::ring_node_log_marginal(p, at.place);
            const double z = log_sum_exp(t[0], t[1]);
            return {t[0] - z, t[1] - z, 0.0, 0.0};
        }
        auto t = detail::ring_slot_log_marginal(p, at.place);
        if (at.transposed)
            t = transpose(t);
        const double z = log_sum_exp(log_sum_exp(t[0], t[1]), log_sum_exp(t[2], t[3]));
        return {t[0] - z, t[1] - z, t[2] - z, t[3] - z};
    }

    static void add(RingPotential& p, const Term& at, const Table& t, double sign)
    {
        if (!at.on_slot) {
            p.unary[at.place][0] += sign * t[0];
            p.unary[at.place][1] += sign * t[1];
            return;
        }
        const Table v = at.transposed ? transpose(t) : t;
        for (int k = 0; k < 4; ++k)
            p.pair[at.place][k] += sign * v[k];
    }

    void rebuild()
    {
        pot = base;
        for (const auto& in : inner)
            for (const auto& l : in.links)
                add(pot[l.outer], l.at, l.lambda, 1.0);
    }

    // Linearizes the negative-count entropies at a point extrapolated past
    // the current inner beliefs along their last outer step.
    void outer_step()
    {
        constexpr double kExtrapolate = 0.8;
        if (prev_q.empty())
            for (const auto& in : inner)
                prev_q.push_back(in.q);
        for (std::size_t i = 0; i < inner.size(); ++i) {
            auto& in = inner[i];
            Table x{};
            for (std::size_t k = 0; k < in.size; ++k)
                x[k] = in.q[k] + kExtrapolate * (in.q[k] - prev_q[i][k]);
            double z = x[0];
            for (std::size_t k = 1; k < in.size; ++k)
                z = log_sum_exp(z, x[k]);
            for (std::size_t k = 0; k < in.size; ++k)
                in.rho[k] = (in.kappa - in.kappa_convex) * (x[k] - z);
            prev_q[i] = in.q;
        }
        rebuild();
    }

    // One pass of exact block maximization over the multipliers of each
    // inner region. Returns the largest change of an inner log-belief, or
    // NaN when a table became non-finite.
    double sweep()
    {
        double change = 0.0;
        std::vector<Table> mu;
        for (auto& in : inner) {
            if (in.passive())
                continue;
            const std::size_t size = in.size;
            const double n = static_cast<double>(in.links.size());
            Table q{};
            mu.resize(in.links.size());
            for (std::size_t i = 0; i < in.links.size(); ++i) {
                auto& l = in.links[i];
                add(pot[l.outer], l.at, l.lambda, -1.0);
                mu[i] = marginal(pot[l.outer], l.at);
                for (std::size_t k = 0; k < size; ++k)
                    q[k] += mu[i][k];
            }
            for (std::size_t k = 0; k < size; ++k)
                q[k] = (q[k] - in.rho[k]) / (n + in.kappa_convex);
            double z = q[0];
            for (std::size_t k = 1; k < size; ++k)
                z = log_sum_exp(z, q[k]);
            for (std::size_t k = 0; k < size; ++k)
                q[k] -= z;
            for (std::size_t k = 0; k < size; ++k) {
                if (!std::isfinite(q[k]))
                    return std::numeric_limits<double>::quiet_NaN();
                change = std::max(change, std::abs(q[k] - in.q[k]));
            }
            in.q = q;
            for (std::size_t i = 0; i < in.links.size(); ++i) {
                auto& l = in.links[i];
                for (std::size_t k = 0; k < size; ++k)
                    l.lambda[k] = q[k] - mu[i][k];
                add(pot[l.outer], l.at, l.lambda, 1.0);
            }
        }
        return change;
    }

    std::vector<RegionBelief> beliefs() const
    {
        std::vector<RegionBelief> out(rg.size());
        for (std::size_t o = 0; o < outer.size(); ++o)
            out[outer[o]] = belief_from_potential(rg.region(outer[o]).ring, pot[o]);
        for (const auto& in : inner) {
            const Table q = in.passive() ? marginal(pot[in.links[0].outer], in.links[0].at) : in.q;
            std::vector<double> p(in.size);
            for (std::size_t k = 0; k < p.size(); ++k)
                p[k] = std::exp(q[k]);
            out[in.region] = RegionBelief::from_table(rg.region(in.region).ring, p);
        }
        return out;
    }
};

void finish(BeliefState& st, const RegionGraph& rg, const MarkovNet& m)
{
    st.log_z_estimate = region_free_energy(rg, st.beliefs, m).log_z;
    st.node_marginals.assign(m.num_vars(), {0.5, 0.5});
    std::vector<bool> have(m.num_vars(), false);
    for (int r = 0; r < rg.size(); ++r)
        if (rg.region(r).ring.size() == 1) {
            const Vertex v = rg.region(r).ring[0];
            st.node_marginals[v] = st.beliefs[r].node[0];
            have[v] = true;
        }
    for (int r = 0; r < rg.size(); ++r)
        for (std::size_t i = 0; i < rg.region(r).ring.size(); ++i) {
            const Vertex v = rg.region(r).ring[i];
            if (!have[v]) {
                st.node_marginals[v] = st.beliefs[r].node[i];
                have[v] = true;
            }
        }
}

void check_options(const GbpOptions& opts)
{
    if (!(opts.damping >= 0.0 && opts.damping < 1.0))
        throw ValidationError("GBP damping must lie in [0, 1)");
    if (opts.max_iters < 0)
        throw ValidationError("GBP max_iters must be non-negative");
    if (opts.inner_iters < 1)
        throw ValidationError("GBP inner_iters must be positive");
    if (!(opts.tolerance > 0.0))
        throw ValidationError("GBP tolerance must be positive");
}

} // namespace

// --- drivers ----------------------------------------------------------------

const char* solver_name(GbpSolver s)
{
    switch (s) {
    case GbpSolver::parent_to_child:
        return "parent-to-child";
    case GbpSolver::double_loop:
        return "double-loop";
    case GbpSolver::automatic:
        return "auto";
    }
    return "?";
}

BeliefState run_double_loop(const RegionGraph& rg, const MarkovNet& m, const GbpOptions& opts)
{
    check_options(opts);
    DoubleLoop dl(rg, m);
    BeliefState st;
    st.solver = GbpSolver::double_loop;
    double inner_tol = opts.tolerance;
    bool broken = false;
    for (int step = 0; step < opts.max_iters && !broken; ++step) {
        std::vector<DoubleLoop::Table> before;
        for (const auto& in : dl.inner)
            before.push_back(in.q);
        dl.outer_step();
        double last = 0.0;
        for (int s = 0; s < opts.inner_iters; ++s) {
            last = dl.sweep();
            ++st.iterations;
            if (std::isnan(last)) {
                broken = true;
                break;
            }
            if (last < inner_tol)
                break;
        }
        if (broken)
            break;
        double moved = 0.0;
        for (std::size_t i = 0; i < dl.inner.size(); ++i)
            for (std::size_t k = 0; k < dl.inner[i].size; ++k)
                moved = std::max(moved, std::abs(dl.inner[i].q[k] - before[i][k]));
        st.max_residual = std::max(moved, last);
        if (st.max_residual < opts.tolerance) {
            st.converged = true;
            break;
        }
        inner_tol = std::max(0.1 * opts.tolerance, 0.01 * moved);
    }
    if (broken) {
        st.max_residual = std::numeric_limits<double>::infinity();
        dl.rebuild();
    }
    st.beliefs = dl.beliefs();
    finish(st, rg, m);
    return st;
}

BeliefState run_gbp(const RegionGraph& rg, const MarkovNet& m, const GbpOptions& opts, const Messages* warm_start)
{
    check_options(opts);
    if (opts.solver == GbpSolver::double_loop)
        return run_double_loop(rg, m, opts);
    const ParentToChild engine(rg, m);
    BeliefState st;
    st.messages = engine.uniform_messages();
    if (warm_start) {
        if (warm_start->size() != st.messages.size())
            throw ValidationError("GBP warm start has the wrong number of messages");
        for (std::size_t a = 0; a < st.messages.size(); ++a)
            if ((*warm_start)[a].size() != st.messages[a].size())
                throw ValidationError("GBP warm start message " + std::to_string(a) + " has the wrong size");
        st.messages = *warm_start;
    }

    const double d = opts.damping;
    Messages previous;
    while (st.iterations < opts.max_iters) {
        previous = st.messages;
        double residual = 0.0;
        bool finite = true;
        for (int a : engine.schedule()) {
            const auto computed = engine.update_message(st.messages, a);
            auto& old = st.messages[a];
            for (std::size_t k = 0; k < old.size(); ++k) {
                const double next = d * old[k] + (1.0 - d) * computed[k];
                finite = finite && std::isfinite(next);
                residual = std::max(residual, std::abs(next - old[k]));
                old[k] = next;
            }
        }
        ++st.iterations;
        if (!finite) {
            st.messages = std::move(previous);
            st.max_residual = std::numeric_limits<double>::infinity();
            break;
        }
        st.max_residual = residual;
        if (residual < opts.tolerance) {
            st.converged = true;
            break;
        }
    }

    if (!st.converged && opts.solver == GbpSolver::automatic) {
        BeliefState dl = run_double_loop(rg, m, opts);
        dl.iterations += st.iterations;
        return dl;
    }

    st.beliefs.reserve(rg.size());
    for (int r = 0; r < rg.size(); ++r)
        st.beliefs.push_back(engine.region_belief(st.messages, r));
    finish(st, rg, m);
    return st;
}

BeliefState run_bp(const MarkovNet& m, const GbpOptions& opts) { return run_gbp(build_bethe(m.graph()), m, opts); }

RegionBelief region_belief(const RegionGraph& rg, const Messages& messages, const MarkovNet& m, int region)
{
    return ParentToChild(rg, m).region_belief(messages, region);
}

std::vector<double> update_message(const RegionGraph& rg, const Messages& messages, const MarkovNet& m, int arc)
{
    return ParentToChild(rg, m).update_message(messages, arc);
}

FreeEnergy region_free_energy(const RegionGraph& rg, std::span<const RegionBelief> beliefs, const MarkovNet& m)
{
    if (static_cast<int>(beliefs.size()) != rg.size())
        throw ValidationError("free energy: one belief per region required");
    const Graph& g = m.graph();
    const auto down = down_sets(rg);
    std::vector<int> unary_cov(m.num_vars(), 0), pair_cov(g.num_edges(), 0);
    FreeEnergy fe;
    for (int r = 0; r < rg.size(); ++r) {
        const int kappa = rg.region(r).kappa;
        const RegionBelief& b = beliefs[r];
        double energy = 0.0;
        for (int d : down[r]) {
            for (Vertex v : rg.region(d).unary_factors) {
                unary_cov[v] += kappa;
                const auto p = b.marginal(v);
                const auto lf = m.log_unary(v);
                energy += p[0] * lf[0] + p[1] * lf[1];
            }
            for (int e : rg.region(d).pair_factors) {
                pair_cov[e] += kappa;
                const auto p = b.marginal(g.edge(e).u, g.edge(e).v);
                const auto lf = m.log_pair(e);
                for (int k = 0; k < 4; ++k)
                    energy += p[k] * lf[k];
            }
        }
        if (kappa != 0)
            fe.free_energy += kappa * (b.neg_entropy() - energy);
    }
    for (Vertex v = 0; v < m.num_vars(); ++v)
        if (unary_cov[v] != 1)
            throw ValidationError("free energy: unary factor " + std::to_string(v) + " has coverage " +
                                  std::to_string(unary_cov[v]));
    for (int e = 0; e < g.num_edges(); ++e)
        if (pair_cov[e] != 1)
            throw ValidationError("free energy: pair factor " + to_string(g.edge(e)) + " has coverage " +
                                  std::to_string(pair_cov[e]));
    fe.log_z = -fe.free_energy;
    return fe;
}

double consistency_residual(const RegionGraph& rg, std::span<const RegionBelief> beliefs)
{
    double worst = 0.0;
    for (const auto& arc : rg.arcs()) {
        const RegionBelief& P = beliefs[arc.parent];
        const RegionBelief& C = beliefs[arc.child];
        if (C.ring.size() == 1) {
            const auto p = P.marginal(C.ring[0]);
            for (int x = 0; x < 2; ++x)
                worst = std::max(worst, std::abs(p[x] - C.node[0][x]));
        } else if (C.ring.size() == 2) {
            const auto p = P.marginal(C.ring[0], C.ring[1]);
            for (int x = 0; x < 4; ++x)
                worst = std::max(worst, std::abs(p[x] - C.pair[0][x]));
        } else {
            throw ValidationError("consistency residual: child region " + ring_text(C.ring) + " is too large");
        }
    }
    return worst;
}

} // namespace loopsrg
