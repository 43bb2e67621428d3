#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "loopsrg/error.hpp"
#include "loopsrg/experiments.hpp"
#include "loopsrg/markov.hpp"
#include "support.hpp"

using namespace loopsrg;

TEST_SUITE("experiments")
{

TEST_CASE("error metrics on a hand example")
{
    BeliefState b;
    b.log_z_estimate = 1.25;
    b.node_marginals = {{0.6, 0.4}, {0.5, 0.5}};
    ExactResult e;
    e.log_z = 1.0;
    e.node_marginals = {{0.5, 0.5}, {0.7, 0.3}};
    const auto m = error_metrics(b, e, 2);
    CHECK(m.error_z == doctest::Approx(0.25));
    // (0.1 + 0.1 + 0.2 + 0.2) / 2
    CHECK(m.error_l1 == doctest::Approx(0.3));
    CHECK_THROWS_AS(error_metrics(b, e, 3), ValidationError);
}

TEST_CASE("star perturbation sequence on K20")
{
    const Graph g = complete_graph(20);
    const auto seq = perturb_star_sequence(g, 0, 30, 7);
    REQUIRE(seq.size() == 31);
    for (std::size_t t = 0; t < seq.size(); ++t) {
        CHECK(seq[t].size() == 171);
        CHECK(is_cycle_basis(seq[t].cycles(), g));
        CHECK(is_fundamental(seq[t]).ok);
        // Step t has exactly t cycles avoiding the root.
        int off_root = 0;
        for (const auto& c : seq[t].cycles()) {
            CHECK(c.length() == 3);
            const auto& vs = c.vertices();
            off_root += std::find(vs.begin(), vs.end(), 0) == vs.end() ? 1 : 0;
        }
        CHECK(off_root == static_cast<int>(t));
    }
    const auto again = perturb_star_sequence(g, 0, 30, 7);
    for (std::size_t t = 0; t < seq.size(); ++t)
        CHECK(again[t].cycles().size() == seq[t].cycles().size());
    CHECK(format_cycles(again.back().cycles()) == format_cycles(seq.back().cycles()));
    CHECK_THROWS_AS(perturb_star_sequence(complete_graph(4), 0, 4, 1), ValidationError);
}

TEST_CASE("grid partial-TR basis: faces first, then fundamental extension")
{
    const Graph g = gen_grid_longrange(10, 10, 50, 3);
    const auto b = grid_partial_tr_basis(g, 10, 10);
    CHECK(b.size() == 131);
    const auto faces = grid_face_basis(10, 10);
    for (std::size_t i = 0; i < 81; ++i)
        CHECK(b.cycles()[i].same_edges(faces.cycles()[i]));
    CHECK(is_cycle_basis(b.cycles(), g));
    CHECK(is_fundamental(b).ok);

    const Graph plain = gen_grid_longrange(4, 4, 0, 1);
    const auto pb = grid_partial_tr_basis(plain, 4, 4);
    CHECK(format_cycles(pb.cycles()) == format_cycles(grid_face_basis(4, 4).cycles()));
}

TEST_CASE("neighborhood star core size")
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Graph g = gen_partial_ktree(18, 4, 0.6, s);
        Vertex root = 0;
        for (Vertex v = 1; v < g.num_vertices(); ++v)
            if (g.degree(v) > g.degree(root))
                root = v;
        std::set<Vertex> closed{root};
        for (const auto& nb : g.neighbors(root))
            closed.insert(nb.vertex);
        int inside = 0;
        for (const auto& e : g.edges())
            inside += closed.count(e.u) && closed.count(e.v) ? 1 : 0;
        const auto core = neighborhood_star_core(g);
        CHECK(static_cast<int>(core.size()) == inside - g.degree(root));
        for (const auto& c : core.cycles()) {
            const auto& vs = c.vertices();
            CHECK(std::find(vs.begin(), vs.end(), root) != vs.end());
        }
    }
}

TEST_CASE("CSV formatting and round trip")
{
    std::vector<ExperimentRow> rows(3);
    rows[0] = {"grid_longrange", 5, 2.0, "gbp_fcb", 0.125, 0.0625, 17, true};
    rows[1] = {"grid_longrange", 5, 0.0, "bp", std::nullopt, std::nullopt, 1000, false};
    rows[2] = {"grid_longrange", 4, 8.0, "bp", 1.0 / 3.0, 2e-12, 3, true};
    const std::string text = format_csv(rows);
    CHECK(text ==
          std::string(kCsvHeader) + "\n"
          "grid_longrange,4,8,bp,0.3333333333,2e-12,3,1\n"
          "grid_longrange,5,0,bp,,,1000,0\n"
          "grid_longrange,5,2,gbp_fcb,0.125,0.0625,17,1\n");
    const auto back = parse_csv(text);
    REQUIRE(back.size() == 3);
    CHECK(back[1].method == "bp");
    CHECK_FALSE(back[1].error_z.has_value());
    CHECK(back[2].error_l1.value() == 0.0625);
    CHECK(format_csv(back) == text);

    CHECK(format_csv({}) == std::string(kCsvHeader) + "\n");
    CHECK(parse_csv(std::string(kCsvHeader) + "\n").empty());
    CHECK_THROWS_WITH_AS(parse_csv("a,b\n"), doctest::Contains(":1"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_csv(std::string(kCsvHeader) + "\nx,1,2,bp,,,3\n", "f.csv"), doctest::Contains("f.csv:2"),
                         ValidationError);
    CHECK_THROWS_AS(read_csv("/nonexistent/rows.csv"), IoError);

    const auto path = (std::filesystem::temp_directory_path() / "loopsrg_rows_test.csv").string();
    write_csv(rows, path);
    CHECK(format_csv(read_csv(path)) == text);
    std::remove(path.c_str());
}

TEST_CASE("experiment drivers are deterministic and independent of jobs")
{
    nlohmann::json p = {{"experiment", "grid_longrange"}, {"seed", 11}, {"M", 3}, {"extra", {0, 3}}};
    ExperimentOptions serial, parallel;
    parallel.jobs = 4;
    const auto a = run_experiment(p, serial);
    const auto b = run_experiment(p, parallel);
    CHECK(a.size() == 2 * 3 * 3);
    CHECK(format_csv(a) == format_csv(b));
    for (const auto& r : a) {
        CHECK(r.error_z.has_value());
        CHECK(r.converged);
    }
    std::set<std::string> methods;
    for (const auto& r : a)
        methods.insert(r.method);
    CHECK(methods == std::set<std::string>{"bp", "gbp_fcb", "gbp_partial_tr"});
}

TEST_CASE("star perturbation rows")
{
    const auto rows = exp_star_perturbation(6, 2, 3, 1.0, 1.0 / 3.0, 9);
    CHECK(rows.size() == 2 * 4);
    for (const auto& r : rows) {
        CHECK(r.method == (r.param == 0.0 ? "gbp_tr" : "gbp_partial_tr"));
        CHECK(r.error_l1.has_value());
    }
}

TEST_CASE("instances beyond the oracle cap get empty errors")
{
    ExperimentOptions o;
    o.exact_cap = 10;
    const auto rows = exp_grid_longrange(4, 4, {1}, 1, 1.0, 0.5, 2, o);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows)
        CHECK_FALSE(r.error_z.has_value());
}

TEST_CASE("parameter documents")
{
    CHECK_THROWS_AS(run_experiment({{"experiment", "grid_longrange"}}), ValidationError);
    CHECK_THROWS_AS(run_experiment({{"experiment", "nope"}, {"seed", 1}}), ValidationError);
    CHECK_THROWS_AS(run_experiment({{"experiment", "grid_longrange"}, {"seed", 1}, {"M", "three"}}), ValidationError);
    CHECK_THROWS_AS(run_experiment(nlohmann::json::array()), ValidationError);
    const auto rows = run_experiment({{"experiment", "partial_ktree"}, {"seed", 3}, {"M", 1}, {"n", 9}, {"K", 3},
                                      {"connectivity", {0.7}}});
    CHECK(rows.size() == 3);
}

}
