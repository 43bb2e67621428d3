#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "loopsrg/cycle_bases.hpp"
#include "loopsrg/error.hpp"
#include "loopsrg/inference.hpp"
#include "loopsrg/region_graph.hpp"
#include "support.hpp"

using namespace loopsrg;

namespace {

GbpOptions tight()
{
    GbpOptions o;
    o.tolerance = 1e-13;
    o.max_iters = 5000;
    return o;
}

double max_marginal_gap(const std::vector<std::array<double, 2>>& a, const std::vector<std::array<double, 2>>& b)
{
    double gap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        gap = std::max(gap, std::abs(a[i][0] - b[i][0]));
    return gap;
}

} // namespace

TEST_SUITE("inference")
{

TEST_CASE("exact oracle: two nodes and a three-chain in closed form")
{
    const double w = 0.7;
    const MarkovNet two(Graph(2, {{0, 1}}), {0.0, 0.0}, {w});
    const auto r2 = exact_brute_force(two);
    CHECK(r2.log_z == doctest::Approx(std::log(2 * std::exp(w) + 2 * std::exp(-w))).epsilon(1e-14));
    CHECK(r2.edge_marginals[0][0] == doctest::Approx(std::exp(w) / (2 * std::exp(w) + 2 * std::exp(-w))));

    // Spins s = +1 for state 0; summing out the ends of the chain:
    //   Z = sum_{s1} e^{h1 s1} 2cosh(h0 + w s1) 2cosh(h2 + w s1)
    const MarkovNet chain(path_graph(3), {1.0, 0.0, -1.0}, {0.5, 0.5});
    const double z = 8.0 * std::cosh(1.5) * std::cosh(0.5);
    const double p0 = (std::exp(1.5) * 2 * std::cosh(-0.5) + std::exp(0.5) * 2 * std::cosh(-1.5)) / z;
    const auto r3 = exact_brute_force(chain);
    CHECK(std::abs(r3.log_z - std::log(z)) < 1e-12);
    CHECK(std::abs(r3.node_marginals[0][0] - p0) < 1e-12);
    CHECK(std::abs(r3.node_marginals[1][0] - 0.5) < 1e-12);
    CHECK(std::abs(r3.node_marginals[2][1] - p0) < 1e-12);

    // BP is exact on the chain.
    const auto bp = run_bp(chain, tight());
    CHECK(bp.converged);
    CHECK(std::abs(bp.log_z_estimate - std::log(z)) < 1e-12);
    CHECK(std::abs(bp.node_marginals[0][0] - p0) < 1e-12);
}

TEST_CASE("exact oracle agrees with plain enumeration")
{
    for (std::uint64_t s = 0; s < 30; ++s) {
        const Graph g = testsupport::random_connected_graph(2 + static_cast<int>(s % 11), static_cast<int>(s % 9), 40 + s);
        const auto m = testsupport::random_model(g, 1.5, 1.5, s);
        const auto want = testsupport::brute_force(m);
        const auto got = exact_brute_force(m);
        CHECK(got.log_z == doctest::Approx(want.log_z).epsilon(1e-12));
        for (int i = 0; i < m.num_vars(); ++i)
            CHECK(std::abs(got.node_marginals[i][0] - want.node[i][0]) < 1e-12);
        for (int e = 0; e < g.num_edges(); ++e)
            for (int k = 0; k < 4; ++k)
                CHECK(std::abs(got.edge_marginals[e][k] - want.pair[e][k]) < 1e-12);
    }
}

TEST_CASE("exact oracle cap")
{
    const auto m = testsupport::uniform_model(path_graph(10));
    CHECK_THROWS_AS(exact_brute_force(m, 9), ValidationError);
    CHECK(exact_brute_force(m, 10).log_z == doctest::Approx(10 * std::log(2.0)));
    ::setenv("LOOPSRG_EXACT_CAP", "12", 1);
    CHECK(exact_cap_from_env() == 12);
    ::setenv("LOOPSRG_EXACT_CAP", "junk", 1);
    CHECK(exact_cap_from_env() == kDefaultExactCap);
    ::setenv("LOOPSRG_EXACT_CAP", "1000", 1);
    CHECK(exact_cap_from_env() == 40);
    ::unsetenv("LOOPSRG_EXACT_CAP");
    CHECK(exact_cap_from_env() == kDefaultExactCap);
}

TEST_CASE("uniform model: uniform messages are a fixed point")
{
    const Graph g = grid_graph(3, 3);
    const auto rg = build_loop_srg(g, grid_face_basis(3, 3));
    const auto st = run_gbp(rg, testsupport::uniform_model(g));
    CHECK(st.converged);
    CHECK(st.iterations == 1);
    CHECK(st.max_residual == 0.0);
    CHECK(st.log_z_estimate == doctest::Approx(9 * std::log(2.0)).epsilon(1e-12));
    for (const auto& p : st.node_marginals)
        CHECK(p[0] == doctest::Approx(0.5));
}

TEST_CASE("GBP on a Loop-SRG is exact for a single cycle")
{
    for (int L = 3; L <= 9; ++L) {
        const Graph g = cycle_graph(L);
        const auto m = testsupport::random_model(g, 1.0, 1.5, static_cast<std::uint64_t>(L));
        const auto st = run_gbp(build_loop_srg(g, construct_basis(g)), m, tight());
        const auto ex = exact_brute_force(m);
        CHECK(st.converged);
        CHECK(std::abs(st.log_z_estimate - ex.log_z) < 1e-10);
        CHECK(max_marginal_gap(st.node_marginals, ex.node_marginals) < 1e-10);
    }
}

TEST_CASE("GBP on a Loop-SRG is exact on cactus graphs")
{
    // Triangles 0-1-2 and 2-3-4 sharing vertex 2, plus a pendant 4-5.
    const Graph g(6, {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {2, 4}, {4, 5}});
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto m = testsupport::random_model(g, 1.0, 1.5, s);
        const auto st = run_gbp(build_loop_srg(g, construct_basis(g)), m, tight());
        const auto ex = exact_brute_force(m);
        CHECK(std::abs(st.log_z_estimate - ex.log_z) < 1e-9);
        CHECK(max_marginal_gap(st.node_marginals, ex.node_marginals) < 1e-9);
    }
}

TEST_CASE("BP through the region engine matches a direct implementation")
{
    int compared = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const Graph g = testsupport::random_connected_graph(4 + static_cast<int>(s % 8), static_cast<int>(s % 6), 300 + s);
        const auto m = testsupport::random_model(g, 1.0, 0.6, s);
        const auto ref = testsupport::direct_bp(m);
        if (!ref.converged)
            continue;
        const auto st = run_bp(m, tight());
        REQUIRE(st.converged);
        ++compared;
        CHECK(max_marginal_gap(st.node_marginals, ref.node) < 1e-8);
        CHECK(std::abs(st.log_z_estimate - ref.log_z) < 1e-8);
    }
    CHECK(compared >= 45);
}

TEST_CASE("converged beliefs are consistent")
{
    const Graph g = grid_graph(4, 4);
    const auto m = testsupport::random_model(g, 1.0, 1.0, 8);
    const auto rg = build_loop_srg(g, grid_face_basis(4, 4));
    const auto st = run_gbp(rg, m, tight());
    REQUIRE(st.converged);
    CHECK(consistency_residual(rg, st.beliefs) < 1e-10);
    const auto ex = exact_brute_force(m);
    CHECK(max_marginal_gap(st.node_marginals, ex.node_marginals) < 0.05);
    // Unconverged beliefs are not.
    GbpOptions one;
    one.max_iters = 1;
    one.solver = GbpSolver::parent_to_child;
    const auto early = run_gbp(rg, m, one);
    CHECK_FALSE(early.converged);
    CHECK(consistency_residual(rg, early.beliefs) > 1e-6);
}

TEST_CASE("region free energy of exact beliefs on a tree is -log Z")
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Graph g = testsupport::random_connected_graph(7, 0, 60 + s);
        const auto m = testsupport::random_model(g, 1.5, 1.5, s);
        const auto ex = testsupport::brute_force(m);
        const auto rg = build_bethe(g);
        std::vector<RegionBelief> beliefs;
        for (const auto& r : rg.regions()) {
            if (r.ring.size() == 2) {
                const auto& t = ex.pair[*g.edge_id(r.ring[0], r.ring[1])];
                beliefs.push_back(RegionBelief::from_table(r.ring, t));
            } else {
                beliefs.push_back(RegionBelief::from_table(r.ring, ex.node[r.ring[0]]));
            }
        }
        const auto fe = region_free_energy(rg, beliefs, m);
        CHECK(fe.log_z == doctest::Approx(ex.log_z).epsilon(1e-12));
        CHECK(fe.free_energy == doctest::Approx(-ex.log_z).epsilon(1e-12));
        CHECK(consistency_residual(rg, beliefs) < 1e-14);
    }
}

TEST_CASE("free energy rejects unbalanced factor coverage")
{
    const Graph g = cycle_graph(3);
    const auto base = build_bethe(g);
    auto regions = base.regions();
    regions[0].pair_factors.clear();
    RegionGraph rg(regions, base.arcs());
    rg.set_counting_numbers(counting_numbers(rg));
    const auto m = testsupport::random_model(g, 1.0, 1.0, 1);
    const ParentToChild engine(rg, m);
    std::vector<RegionBelief> beliefs;
    for (int r = 0; r < rg.size(); ++r)
        beliefs.push_back(engine.region_belief(engine.uniform_messages(), r));
    CHECK_THROWS_AS(region_free_energy(rg, beliefs, m), ValidationError);
}

TEST_CASE("region beliefs")
{
    const auto b = RegionBelief::from_table({3, 1}, std::vector<double>{0.1, 0.2, 0.3, 0.4});
    CHECK(b.marginal(3)[0] == doctest::Approx(0.3));
    CHECK(b.marginal(1)[0] == doctest::Approx(0.4));
    CHECK(b.marginal(3, 1)[1] == doctest::Approx(0.2));
    CHECK(b.marginal(1, 3)[1] == doctest::Approx(0.3));
    CHECK(b.neg_entropy() == doctest::Approx(0.1 * std::log(0.1) + 0.2 * std::log(0.2) + 0.3 * std::log(0.3) + 0.4 * std::log(0.4)));
    CHECK_THROWS_AS(b.marginal(7), ValidationError);
    CHECK_THROWS_AS(RegionBelief::from_table({0, 1, 2}, std::vector<double>(8, 1.0)), ValidationError);
    CHECK_THROWS_AS(RegionBelief::from_table({0}, std::vector<double>{-1.0, 2.0}), ValidationError);

    // Loop belief table agrees with its node and slot marginals.
    const Graph g = cycle_graph(5);
    const auto m = testsupport::random_model(g, 1.0, 1.0, 4);
    const auto rg = build_loop_srg(g, construct_basis(g));
    const auto st = run_gbp(rg, m, tight());
    const auto& loop = st.beliefs[0];
    const auto t = loop.table();
    REQUIRE(t.size() == 32);
    double total = 0.0, p0 = 0.0;
    for (std::size_t x = 0; x < t.size(); ++x) {
        total += t[x];
        if (((x >> 4) & 1U) == 0)
            p0 += t[x];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p0 == doctest::Approx(loop.node[0][0]).epsilon(1e-12));
    double ent = 0.0;
    for (double p : t)
        ent += p * std::log(p);
    CHECK(loop.neg_entropy() == doctest::Approx(ent).epsilon(1e-12));
}

TEST_CASE("a converged state stays converged under any damping")
{
    const Graph g = grid_graph(3, 4);
    const auto m = testsupport::random_model(g, 1.0, 1.0, 21);
    const auto rg = build_loop_srg(g, grid_face_basis(3, 4));
    auto o = tight();
    o.solver = GbpSolver::parent_to_child;
    const auto cold = run_gbp(rg, m, o);
    REQUIRE(cold.converged);
    CHECK(cold.solver == GbpSolver::parent_to_child);
    for (double d : {0.0, 0.3, 0.7}) {
        auto w = o;
        w.damping = d;
        w.tolerance = 1e-11;
        const auto warm = run_gbp(rg, m, w, &cold.messages);
        CHECK(warm.converged);
        CHECK(warm.iterations == 1);
        CHECK(std::abs(warm.log_z_estimate - cold.log_z_estimate) < 1e-10);
        CHECK(max_marginal_gap(warm.node_marginals, cold.node_marginals) < 1e-10);
    }
}

TEST_CASE("warm start from a fixed point converges immediately")
{
    const Graph g = complete_graph(4);
    const auto m = testsupport::random_model(g, 1.0, 0.5, 2);
    const auto rg = build_loop_srg(g, star_basis(g, 0));
    auto o = tight();
    o.solver = GbpSolver::parent_to_child;
    const auto cold = run_gbp(rg, m, o);
    REQUIRE(cold.converged);
    o.tolerance = 1e-10;
    const auto warm = run_gbp(rg, m, o, &cold.messages);
    CHECK(warm.iterations == 1);
    CHECK(warm.converged);
    Messages wrong = cold.messages;
    wrong.pop_back();
    CHECK_THROWS_AS(run_gbp(rg, m, o, &wrong), ValidationError);
}

TEST_CASE("double loop reaches the parent-to-child fixed point")
{
    int compared = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Graph g = grid_graph(3, 3);
        const auto m = testsupport::random_model(g, 1.0, 0.5, 300 + s);
        const auto rg = build_loop_srg(g, grid_face_basis(3, 3));
        auto o = tight();
        o.solver = GbpSolver::parent_to_child;
        const auto ptc = run_gbp(rg, m, o);
        if (!ptc.converged)
            continue;
        ++compared;
        o.solver = GbpSolver::double_loop;
        o.tolerance = 1e-12;
        const auto dl = run_gbp(rg, m, o);
        REQUIRE(dl.converged);
        CHECK(dl.solver == GbpSolver::double_loop);
        CHECK(dl.messages.empty());
        CHECK(std::abs(dl.log_z_estimate - ptc.log_z_estimate) < 1e-8);
        CHECK(max_marginal_gap(dl.node_marginals, ptc.node_marginals) < 1e-8);
        CHECK(consistency_residual(rg, dl.beliefs) < 1e-8);
    }
    CHECK(compared >= 5);
}

TEST_CASE("double loop is exact on a single cycle")
{
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Graph g = cycle_graph(4 + static_cast<int>(s));
        const auto m = testsupport::random_model(g, 1.0, 1.5, 70 + s);
        const auto rg = build_loop_srg(g, construct_basis(g));
        auto o = tight();
        o.solver = GbpSolver::double_loop;
        const auto st = run_gbp(rg, m, o);
        const auto ex = exact_brute_force(m);
        CHECK(st.converged);
        CHECK(std::abs(st.log_z_estimate - ex.log_z) < 1e-8);
        CHECK(max_marginal_gap(st.node_marginals, ex.node_marginals) < 1e-8);
    }
}

TEST_CASE("star bases: parent-to-child breaks down, the fallback converges")
{
    const Graph g = complete_graph(7);
    const auto rg = build_loop_srg(g, star_basis(g, 0));
    const auto m = testsupport::random_model(g, 1.0, 0.1, 5);
    GbpOptions o;
    o.solver = GbpSolver::parent_to_child;
    const auto ptc = run_gbp(rg, m, o);
    CHECK_FALSE(ptc.converged);
    for (const auto& t : ptc.messages)
        for (double x : t)
            CHECK(std::isfinite(x));
    CHECK(std::isfinite(ptc.log_z_estimate));

    o.solver = GbpSolver::automatic;
    const auto st = run_gbp(rg, m, o);
    CHECK(st.converged);
    CHECK(st.solver == GbpSolver::double_loop);
    CHECK(st.iterations > ptc.iterations);
    CHECK(consistency_residual(rg, st.beliefs) < 1e-7);
    const auto ex = exact_brute_force(m);
    CHECK(std::abs(st.log_z_estimate - ex.log_z) < 0.05);
    CHECK(max_marginal_gap(st.node_marginals, ex.node_marginals) < 0.05);
}

TEST_CASE("option validation")
{
    const auto m = testsupport::uniform_model(cycle_graph(3));
    GbpOptions o;
    o.damping = 1.0;
    CHECK_THROWS_AS(run_bp(m, o), ValidationError);
    o = {};
    o.tolerance = 0.0;
    CHECK_THROWS_AS(run_bp(m, o), ValidationError);
    o = {};
    o.max_iters = -1;
    CHECK_THROWS_AS(run_bp(m, o), ValidationError);
    o = {};
    o.inner_iters = 0;
    CHECK_THROWS_AS(run_bp(m, o), ValidationError);
    o = {};
    o.max_iters = 0;
    const auto st = run_bp(m, o);
    CHECK(st.iterations == 0);
    CHECK_FALSE(st.converged);
    CHECK(std::string(solver_name(GbpSolver::double_loop)) == "double-loop");
}

TEST_CASE("message updates match brute-force marginalization")
{
    // One update by hand on a triangle Loop-SRG: loop -> edge (0,1) with
    // all other messages uniform carries the loop's factors outside the
    // edge's down-set, summed over x_2.
    const Graph g = cycle_graph(3);
    const auto m = testsupport::random_model(g, 1.0, 1.0, 5);
    const auto rg = build_loop_srg(g, construct_basis(g));
    const ParentToChild engine(rg, m);
    int arc = -1;
    for (int a = 0; a < static_cast<int>(rg.arcs().size()); ++a)
        if (rg.arcs()[a].parent == 0 && rg.region(rg.arcs()[a].child).scope == std::vector<Vertex>{0, 1})
            arc = a;
    REQUIRE(arc >= 0);
    const auto msg = engine.update_message(engine.uniform_messages(), arc);
    REQUIRE(msg.size() == 4);
    const auto& ring = rg.region(rg.arcs()[arc].child).ring;
    std::array<double, 4> want{};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            int x[3];
            x[ring[0]] = a;
            x[ring[1]] = b;
            double acc = 0.0;
            for (int c = 0; c < 2; ++c) {
                x[2] = c;
                double e = m.log_unary(2)[c];
                e += m.log_pair(*g.edge_id(0, 2))[x[0] * 2 + c];
                e += m.log_pair(*g.edge_id(1, 2))[x[1] * 2 + c];
                acc += std::exp(e);
            }
            want[a * 2 + b] = std::log(acc);
        }
    const double mean = (want[0] + want[1] + want[2] + want[3]) / 4.0;
    for (int k = 0; k < 4; ++k)
        CHECK(msg[k] == doctest::Approx(want[k] - mean).epsilon(1e-12));
    CHECK(update_message(rg, engine.uniform_messages(), m, arc) == msg);
}

}
