#include "loopsrg/cli.hpp"

#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "loopsrg/cycle_bases.hpp"
#include "loopsrg/error.hpp"
#include "loopsrg/experiments.hpp"
#include "loopsrg/inference.hpp"
#include "loopsrg/markov.hpp"
#include "loopsrg/region_graph.hpp"
#include "loopsrg/rng.hpp"

namespace loopsrg::cli {

namespace {

using nlohmann::json;

std::string one_line(std::string s)
{
    for (char& c : s)
        if (c == '\n' || c == '\r')
            c = ' ';
    return s;
}

std::string list_text(const std::vector<std::size_t>& xs)
{
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i)
        s += (i ? "," : "") + std::to_string(xs[i]);
    return s.empty() ? "-" : s;
}

void emit(const std::string& text, const std::string& path, std::ostream& out)
{
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError(path, "cannot open output file");
    f << text;
    if (!f)
        throw IoError(path, "write failed");
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path, "cannot open file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string marginals_csv(const std::vector<std::array<double, 2>>& marg)
{
    std::string s = "var,p0,p1\n";
    for (std::size_t i = 0; i < marg.size(); ++i)
        s += std::to_string(i) + "," + format_real(marg[i][0]) + "," + format_real(marg[i][1]) + "\n";
    return s;
}

json marginals_json(const std::vector<std::array<double, 2>>& marg)
{
    json a = json::array();
    for (const auto& p : marg)
        a.push_back({p[0], p[1]});
    return a;
}

// --- gen ----------------------------------------------------------------

struct GenArgs {
    std::string family;
    int n = 0, rows = 0, cols = 0, k = 0, extra = 0;
    double connectivity = 1.0;
    double sigma_h = 1.0, sigma_w = 0.5;
    std::uint64_t seed = 0;
    std::string out;
};

void run_gen(const GenArgs& a, std::ostream& out)
{
    const std::uint64_t gseed = derive_seed(a.seed, 0);
    json meta = {{"family", a.family}, {"seed", a.seed}, {"sigma_h", a.sigma_h}, {"sigma_w", a.sigma_w}};
    Graph g;
    if (a.family == "complete") {
        g = complete_graph(a.n);
        meta["n"] = a.n;
    } else if (a.family == "grid") {
        g = grid_graph(a.rows, a.cols);
        meta["rows"] = a.rows;
        meta["cols"] = a.cols;
    } else if (a.family == "cycle") {
        g = cycle_graph(a.n);
        meta["n"] = a.n;
    } else if (a.family == "path") {
        g = path_graph(a.n);
        meta["n"] = a.n;
    } else if (a.family == "wheel") {
        g = wheel_graph(a.n);
        meta["rim"] = a.n;
    } else if (a.family == "ktree") {
        g = random_ktree(a.n, a.k, gseed);
        meta["n"] = a.n;
        meta["K"] = a.k;
    } else if (a.family == "partial-ktree") {
        g = gen_partial_ktree(a.n, a.k, a.connectivity, gseed);
        meta["n"] = a.n;
        meta["K"] = a.k;
        meta["connectivity"] = a.connectivity;
    } else if (a.family == "grid-longrange") {
        g = gen_grid_longrange(a.rows, a.cols, a.extra, gseed);
        meta["rows"] = a.rows;
        meta["cols"] = a.cols;
        meta["extra"] = a.extra;
    } else {
        throw ValidationError("unknown family '" + a.family + "'");
    }
    const MarkovNet m = random_instance(g, a.sigma_h, a.sigma_w, derive_seed(a.seed, 1));
    emit(format_instance(m, meta), a.out, out);
}

// --- basis --------------------------------------------------------------

struct BasisArgs {
    std::string instance, method, core, out;
    int root = 0, rows = 0, cols = 0;
    std::optional<std::uint64_t> seed;
};

CycleBasis core_from_cycles(const Graph& g, std::vector<Cycle> cycles)
{
    std::vector<Edge> edges;
    for (const auto& c : cycles)
        for (const auto& e : c.edges())
            if (!g.has_edge(e.u, e.v))
                throw ValidationError("core cycle " + to_string(c) + " uses non-edge " + to_string(e));
            else if (std::find(edges.begin(), edges.end(), e) == edges.end())
                edges.push_back(e);
    return CycleBasis(Graph(g.num_vertices(), std::move(edges)), std::move(cycles));
}

void run_basis(const BasisArgs& a, std::ostream& out)
{
    const Graph g = read_instance(a.instance).model.graph();
    std::optional<CycleBasis> b;
    if (a.method == "star") {
        b = star_basis(g, a.root);
    } else if (a.method == "faces") {
        if (!(grid_graph(a.rows, a.cols) == g))
            throw ValidationError("faces: instance graph is not the " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                                  " grid (use construct --core for extended grids)");
        b = grid_face_basis(a.rows, a.cols);
    } else if (a.method == "fcb") {
        if (!a.seed)
            throw ValidationError("fcb needs --seed for its random spanning tree");
        b = fcb_from_tree(g, spanning_tree(g, *a.seed));
    } else if (a.method == "construct") {
        if (a.core.empty())
            b = construct_basis(g);
        else
            b = construct_basis(g, core_from_cycles(g, read_cycles(a.core)));
    } else {
        throw ValidationError("unknown basis method '" + a.method + "'");
    }
    emit(format_cycles(b->cycles()), a.out, out);
}

// --- check --------------------------------------------------------------

struct CheckArgs {
    std::string instance, basis, format = "text";
    bool fundamental = false, tree_exact = false, tr_exhaustive = false, tr_sampled = false, singular = false,
         regions = false;
    std::optional<std::uint64_t> seed;
    std::size_t trees = 100, max_cycles = 20;
};

void run_check(CheckArgs a, std::ostream& out)
{
    const MarkovNet m = read_instance(a.instance).model;
    const Graph& g = m.graph();
    const auto cycles = read_cycles(a.basis);
    if (!(a.fundamental || a.tree_exact || a.tr_exhaustive || a.tr_sampled || a.singular || a.regions))
        a.fundamental = a.singular = true;
    if ((a.tree_exact || a.tr_sampled) && !a.seed)
        throw ValidationError("--tree-exact and --tr-sampled need --seed");

    json doc = json::object();
    std::string text;
    if (a.singular) {
        const auto s = is_singular_loopset(cycles);
        doc["singular"] = {{"singular", s.singular}, {"witness", s.witness}};
        text += std::string("singular: ") + (s.singular ? "yes" : "no") + " witness=" + list_text(s.witness) + "\n";
    }
    if (a.regions) {
        const auto rg = testing::build_loop_srg_unchecked(g, cycles);
        const auto rep = validate(rg, m);
        doc["regions"] = {{"balanced", rep.balanced},        {"connected", rep.connected},
                          {"factor_coverage", rep.factor_coverage}, {"scopes_nested", rep.scopes_nested},
                          {"kappa_sum", rep.kappa_sum},      {"singular", rep.singular},
                          {"violations", rep.violations},    {"dump", dump(rg)}};
        text += "regions: kappa_sum=" + std::to_string(rep.kappa_sum) + " balanced=" + (rep.balanced ? "yes" : "no") +
                " connected=" + (rep.connected ? "yes" : "no") + " factor_coverage=" +
                (rep.factor_coverage ? "yes" : "no") + " singular=" + (rep.singular ? "yes" : "no") + "\n" + dump(rg);
    }
    const bool need_basis = a.fundamental || a.tree_exact || a.tr_exhaustive || a.tr_sampled;
    if (need_basis) {
        const CycleBasis b(g, cycles);
        if (a.fundamental) {
            const auto r = is_fundamental(b);
            doc["fundamental"] = {{"fundamental", r.ok}, {"residual", r.residual}};
            text += std::string("fundamental: ") + (r.ok ? "yes" : "no") + " residual=" + list_text(r.residual) + "\n";
        }
        if (a.tree_exact) {
            const auto t = spanning_tree(g, *a.seed);
            const auto r = is_tree_exact(b, t);
            doc["tree_exact"] = {{"tree_exact", r.ok}, {"residual", r.residual}, {"seed", *a.seed}};
            text += std::string("tree-exact: ") + (r.ok ? "yes" : "no") + " residual=" + list_text(r.residual) + "\n";
        }
        if (a.tr_exhaustive) {
            const auto c = is_tree_robust_exhaustive(b, a.max_cycles);
            doc["tr_exhaustive"] = {{"verdict", to_string(c.verdict)}, {"witness", c.witness}};
            text += "tr-exhaustive: " + to_string(c.verdict) + " witness=" + list_text(c.witness) + "\n";
        }
        if (a.tr_sampled) {
            const auto r = is_tree_robust_sampled(b, a.trees, *a.seed);
            json ce = nullptr;
            std::string ce_text = "-";
            if (r.counterexample) {
                ce = json::array();
                ce_text.clear();
                for (const auto& e : r.counterexample->edges()) {
                    ce.push_back({e.u, e.v});
                    ce_text += (ce_text.empty() ? "" : ";") + std::to_string(e.u) + "-" + std::to_string(e.v);
                }
            }
            doc["tr_sampled"] = {{"probably_tree_robust", r.probably_tree_robust},
                                 {"trees", r.trees},
                                 {"failures", r.failures},
                                 {"pass_fraction", r.pass_fraction},
                                 {"counterexample", ce}};
            text += std::string("tr-sampled: ") + (r.probably_tree_robust ? "PROBABLY_TR" : "NOT_TR") +
                    " trees=" + std::to_string(r.trees) + " failures=" + std::to_string(r.failures) +
                    " pass_fraction=" + format_real(r.pass_fraction) + " counterexample=" + ce_text + "\n";
        }
    }
    if (a.format == "json")
        out << doc.dump(2) << "\n";
    else if (a.format == "text")
        out << text;
    else
        throw ValidationError("check supports --format text|json");
}

// --- infer / exact ------------------------------------------------------

GbpSolver parse_solver(const std::string& name)
{
    for (auto s : {GbpSolver::automatic, GbpSolver::parent_to_child, GbpSolver::double_loop})
        if (name == solver_name(s))
            return s;
    throw ValidationError("unknown solver '" + name + "' (auto|parent-to-child|double-loop)");
}

struct InferArgs {
    std::string instance, basis, method = "gbp", format = "text", solver = "auto";
    GbpOptions gbp;
};

void run_infer(InferArgs a, std::ostream& out)
{
    a.gbp.solver = parse_solver(a.solver);
    const MarkovNet m = read_instance(a.instance).model;
    BeliefState st;
    if (a.method == "bp") {
        st = run_bp(m, a.gbp);
    } else if (a.method == "gbp") {
        if (a.basis.empty())
            throw ValidationError("gbp needs --basis");
        const CycleBasis b(m.graph(), read_cycles(a.basis));
        st = run_gbp(build_loop_srg(m.graph(), b), m, a.gbp);
    } else {
        throw ValidationError("unknown inference method '" + a.method + "'");
    }
    if (a.format == "json") {
        json doc = {{"method", a.method},
                    {"log_z", st.log_z_estimate},
                    {"iterations", st.iterations},
                    {"converged", st.converged},
                    {"solver", solver_name(st.solver)},
                    {"max_residual", st.max_residual},
                    {"marginals", marginals_json(st.node_marginals)}};
        out << doc.dump(2) << "\n";
    } else if (a.format == "csv") {
        out << marginals_csv(st.node_marginals);
    } else {
        out << "method " << a.method << "\n"
            << "log_z " << format_real(st.log_z_estimate) << "\n"
            << "iterations " << st.iterations << "\n"
            << "converged " << (st.converged ? "yes" : "no") << "\n"
            << "solver " << solver_name(st.solver) << "\n"
            << "max_residual " << format_real(st.max_residual) << "\n"
            << marginals_csv(st.node_marginals);
    }
}

void run_exact(const std::string& instance, const std::string& format, std::ostream& out)
{
    const MarkovNet m = read_instance(instance).model;
    const auto r = exact_brute_force(m, exact_cap_from_env());
    if (format == "json") {
        json edges = json::array();
        for (int e = 0; e < m.graph().num_edges(); ++e) {
            const auto& p = r.edge_marginals[e];
            edges.push_back({{"u", m.graph().edge(e).u}, {"v", m.graph().edge(e).v}, {"p", {p[0], p[1], p[2], p[3]}}});
        }
        json doc = {{"log_z", r.log_z}, {"marginals", marginals_json(r.node_marginals)}, {"edge_marginals", edges}};
        out << doc.dump(2) << "\n";
    } else if (format == "csv") {
        out << marginals_csv(r.node_marginals);
    } else {
        out << "log_z " << format_real(r.log_z) << "\n" << marginals_csv(r.node_marginals);
    }
}

// --- experiment ---------------------------------------------------------

void run_experiment_cmd(const std::string& params_path, const std::string& out_path, int jobs, std::ostream& out)
{
    const std::string text = read_text(params_path);
    json params;
    try {
        params = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(params_path + ": malformed JSON: " + e.what());
    }
    ExperimentOptions opts;
    opts.jobs = jobs;
    opts.exact_cap = exact_cap_from_env();
    if (params.contains("damping"))
        opts.gbp.damping = params["damping"].get<double>();
    if (params.contains("max_iters"))
        opts.gbp.max_iters = params["max_iters"].get<int>();
    if (params.contains("tolerance"))
        opts.gbp.tolerance = params["tolerance"].get<double>();
    if (params.contains("solver"))
        opts.gbp.solver = parse_solver(params["solver"].get<std::string>());
    emit(format_csv(run_experiment(params, opts)), out_path, out);
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Loop-structured region graphs: cycle bases, GBP and exact inference", "loopsrg"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* c_gen = app.add_subcommand("gen", "Generate a random instance file");
    c_gen->add_option("--family", gen.family, "complete|grid|cycle|path|wheel|ktree|partial-ktree|grid-longrange")->required();
    c_gen->add_option("--n", gen.n, "Vertex count (rim size for wheel)");
    c_gen->add_option("--rows", gen.rows);
    c_gen->add_option("--cols", gen.cols);
    c_gen->add_option("--k", gen.k, "K for (partial) K-trees");
    c_gen->add_option("--connectivity", gen.connectivity);
    c_gen->add_option("--extra", gen.extra, "Long-range edges");
    c_gen->add_option("--sigma-h", gen.sigma_h);
    c_gen->add_option("--sigma-w", gen.sigma_w);
    c_gen->add_option("--seed", gen.seed)->required();
    c_gen->add_option("--out", gen.out, "Output path (stdout if omitted)");

    BasisArgs basis;
    auto* c_basis = app.add_subcommand("basis", "Write a cycle basis file");
    c_basis->add_option("--instance", basis.instance)->required();
    c_basis->add_option("--method", basis.method, "star|faces|fcb|construct")->required();
    c_basis->add_option("--root", basis.root);
    c_basis->add_option("--rows", basis.rows);
    c_basis->add_option("--cols", basis.cols);
    c_basis->add_option("--core", basis.core, "Basis file of the core (construct)");
    c_basis->add_option("--seed", basis.seed, "Spanning tree seed (fcb)");
    c_basis->add_option("--out", basis.out);

    CheckArgs check;
    auto* c_check = app.add_subcommand("check", "Verify a cycle basis");
    c_check->add_option("--instance", check.instance)->required();
    c_check->add_option("--basis", check.basis)->required();
    c_check->add_flag("--fundamental", check.fundamental);
    c_check->add_flag("--tree-exact", check.tree_exact);
    c_check->add_flag("--tr-exhaustive", check.tr_exhaustive);
    c_check->add_flag("--tr-sampled", check.tr_sampled);
    c_check->add_flag("--singular", check.singular);
    c_check->add_flag("--regions", check.regions, "Validate and dump the Loop-SRG");
    c_check->add_option("--seed", check.seed);
    c_check->add_option("--trees", check.trees);
    c_check->add_option("--max-cycles", check.max_cycles);
    c_check->add_option("--format", check.format);

    InferArgs infer;
    auto* c_infer = app.add_subcommand("infer", "Run GBP on a Loop-SRG or BP");
    c_infer->add_option("--instance", infer.instance)->required();
    c_infer->add_option("--basis", infer.basis);
    c_infer->add_option("--method", infer.method, "gbp|bp");
    c_infer->add_option("--damping", infer.gbp.damping);
    c_infer->add_option("--max-iters", infer.gbp.max_iters);
    c_infer->add_option("--tolerance", infer.gbp.tolerance);
    c_infer->add_option("--solver", infer.solver, "auto|parent-to-child|double-loop");
    c_infer->add_option("--inner-iters", infer.gbp.inner_iters);
    c_infer->add_option("--format", infer.format, "text|json|csv");

    std::string exact_instance, exact_format = "text";
    auto* c_exact = app.add_subcommand("exact", "Brute-force log Z and marginals");
    c_exact->add_option("--instance", exact_instance)->required();
    c_exact->add_option("--format", exact_format, "text|json|csv");

    std::string params_path, csv_out;
    int jobs = 1;
    auto* c_exp = app.add_subcommand("experiment", "Run an experiment driver and write CSV");
    c_exp->add_option("--params", params_path, "JSON parameter file")->required();
    c_exp->add_option("--out", csv_out, "CSV path (stdout if omitted)");
    c_exp->add_option("--jobs", jobs)->check(CLI::PositiveNumber);

    std::vector<std::string> storage{"loopsrg"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : storage)
        argv.push_back(s.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "loopsrg: usage-error: " << one_line(e.what()) << "\n" << app.help();
        return kValidation;
    }

    try {
        if (c_gen->parsed()) {
            run_gen(gen, out);
        } else if (c_basis->parsed()) {
            run_basis(basis, out);
        } else if (c_check->parsed()) {
            run_check(check, out);
        } else if (c_infer->parsed()) {
            run_infer(infer, out);
        } else if (c_exact->parsed()) {
            run_exact(exact_instance, exact_format, out);
        } else if (c_exp->parsed()) {
            run_experiment_cmd(params_path, csv_out, jobs, out);
        }
    } catch (const IoError& e) {
        err << "loopsrg: io-error: " << one_line(e.what()) << "\n";
        return kIo;
    } catch (const ValidationError& e) {
        err << "loopsrg: validation-error: " << one_line(e.what()) << "\n";
        return kValidation;
    } catch (const nlohmann::json::exception& e) {
        err << "loopsrg: validation-error: " << one_line(e.what()) << "\n";
        return kValidation;
    }
    return kOk;
}

} // namespace loopsrg::cli
