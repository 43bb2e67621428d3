#include "loopsrg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "loopsrg/error.hpp"
#include "loopsrg/markov.hpp"
#include "loopsrg/region_graph.hpp"
#include "loopsrg/rng.hpp"

namespace loopsrg {

namespace {

constexpr int kSwapRetries = 100;

// Sub-stream ids under derive_seed.
constexpr std::uint64_t kStreamGraph = 0;
constexpr std::uint64_t kStreamModel = 1;
constexpr std::uint64_t kStreamSequence = 2;

// Runs work(i) for i in [0, count) on up to `jobs` threads. Each unit
// writes only its own slot, so the result is independent of scheduling.
// The exception of the lowest failing unit is rethrown.
template <class Work>
void parallel_for(int count, int jobs, Work&& work)
{
    std::vector<std::exception_ptr> errors(count);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                work(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::clamp(jobs, 1, std::max(1, count));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

std::vector<ExperimentRow> flatten(std::vector<std::vector<ExperimentRow>> parts)
{
    std::vector<ExperimentRow> rows;
    for (auto& p : parts)
        for (auto& r : p)
            rows.push_back(std::move(r));
    return rows;
}

std::optional<ExactResult> maybe_exact(const MarkovNet& m, const ExperimentOptions& opts)
{
    if (m.num_vars() > opts.exact_cap)
        return std::nullopt;
    return exact_brute_force(m, opts.exact_cap);
}

ExperimentRow score(const std::string& experiment, std::uint64_t seed, double param, const std::string& method,
                    const BeliefState& st, const std::optional<ExactResult>& exact, int n)
{
    ExperimentRow row;
    row.experiment = experiment;
    row.seed = seed;
    row.param = param;
    row.method = method;
    row.iterations = st.iterations;
    row.converged = st.converged;
    if (exact) {
        const auto e = error_metrics(st, *exact, n);
        row.error_z = e.error_z;
        row.error_l1 = e.error_l1;
    }
    return row;
}

// The deletion process can strand a high-degree vertex whose remaining
// edges are all bridges; such draws are replaced by a fresh K-tree.
Graph partial_ktree_with_redraws(int n, int K, double connectivity, std::uint64_t gseed)
{
    constexpr int kRedraws = 20;
    for (int attempt = 0;; ++attempt) {
        try {
            return gen_partial_ktree(n, K, connectivity, attempt == 0 ? gseed : derive_seed(gseed, attempt));
        } catch (const ValidationError&) {
            if (attempt + 1 >= kRedraws || !(connectivity > 0.0 && connectivity <= 1.0) || K < 2 || n <= K + 1)
                throw;
        }
    }
}

void check_common(int M, double sigma_h, double sigma_w)
{
    if (M < 0)
        throw ValidationError("instance count M must be non-negative");
    if (!(sigma_h >= 0.0) || !(sigma_w >= 0.0))
        throw ValidationError("sigmas must be non-negative");
}

} // namespace

ErrorPair error_metrics(const BeliefState& approx, const ExactResult& exact, int n)
{
    if (n <= 0 || static_cast<int>(approx.node_marginals.size()) != n || static_cast<int>(exact.node_marginals.size()) != n)
        throw ValidationError("error metrics: variable counts differ");
    ErrorPair e;
    e.error_z = std::abs(exact.log_z - approx.log_z_estimate);
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int x = 0; x < 2; ++x)
            total += std::abs(approx.node_marginals[i][x] - exact.node_marginals[i][x]);
    e.error_l1 = total / n;
    return e;
}

std::vector<CycleBasis> perturb_star_sequence(const Graph& g, Vertex root, int steps, std::uint64_t seed)
{
    std::vector<CycleBasis> out;
    out.push_back(star_basis(g, root));
    const int mu = static_cast<int>(out.front().size());
    if (steps < 0 || steps > mu)
        throw ValidationError("perturbation steps must lie in [0, " + std::to_string(mu) + "]");
    Rng rng(seed);
    std::vector<Cycle> cycles = out.front().cycles();
    std::vector<bool> modified(cycles.size(), false);
    const int n = g.num_vertices();
    for (int step = 1; step <= steps; ++step) {
        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < cycles.size(); ++i)
            if (!modified[i])
                open.push_back(i);
        bool accepted = false;
        for (int attempt = 0; attempt < kSwapRetries && !accepted; ++attempt) {
            const std::size_t slot = open[rng.below(open.size())];
            std::vector<Vertex> uv;
            for (Vertex x : cycles[slot].vertices())
                if (x != root)
                    uv.push_back(x);
            const Vertex u = uv[0];
            const Vertex v = uv[1];
            std::vector<Vertex> candidates;
            for (Vertex w = 0; w < n; ++w)
                if (w != root && w != u && w != v && g.has_edge(w, u) && g.has_edge(w, v))
                    candidates.push_back(w);
            if (candidates.empty())
                continue;
            const Vertex w = candidates[rng.below(candidates.size())];
            auto trial = cycles;
            trial[slot] = Cycle({w, u, v});
            if (!is_cycle_basis(trial, g))
                continue;
            CycleBasis b(g, trial);
            if (!is_fundamental(b).ok)
                continue;
            cycles = std::move(trial);
            modified[slot] = true;
            out.push_back(std::move(b));
            accepted = true;
        }
        if (!accepted)
            throw ValidationError("star perturbation step " + std::to_string(step) + ": no fundamental swap found in " +
                                  std::to_string(kSwapRetries) + " attempts");
    }
    return out;
}

std::vector<ExperimentRow> exp_star_perturbation(int n, int M, int steps, double sigma_h, double sigma_w,
                                                 std::uint64_t seed, const ExperimentOptions& opts)
{
    check_common(M, sigma_h, sigma_w);
    if (n < 3)
        throw ValidationError("star perturbation needs n >= 3");
    const Graph g = complete_graph(n);
    const auto bases = perturb_star_sequence(g, 0, steps, derive_seed(seed, kStreamSequence));
    std::vector<RegionGraph> rgs;
    for (const auto& b : bases)
        rgs.push_back(build_loop_srg(g, b));

    std::vector<std::vector<ExperimentRow>> parts(M);
    parallel_for(M, opts.jobs, [&](int m) {
        const std::uint64_t iseed = seed ^ static_cast<std::uint64_t>(m);
        const MarkovNet model = random_instance(g, sigma_h, sigma_w, derive_seed(iseed, kStreamModel));
        const auto exact = maybe_exact(model, opts);
        for (std::size_t s = 0; s < rgs.size(); ++s) {
            const auto st = run_gbp(rgs[s], model, opts.gbp);
            parts[m].push_back(score("star_perturbation", iseed, static_cast<double>(s),
                                     s == 0 ? "gbp_tr" : "gbp_partial_tr", st, exact, n));
        }
    });
    return flatten(std::move(parts));
}

CycleBasis neighborhood_star_core(const Graph& g)
{
    const int n = g.num_vertices();
    if (n == 0)
        throw ValidationError("neighborhood star core of an empty graph");
    Vertex root = 0;
    for (Vertex v = 1; v < n; ++v)
        if (g.degree(v) > g.degree(root))
            root = v;
    std::vector<int> local(n, -1);
    std::vector<Vertex> global{root};
    local[root] = 0;
    for (const auto& nb : g.neighbors(root)) {
        local[nb.vertex] = static_cast<int>(global.size());
        global.push_back(nb.vertex);
    }
    std::vector<Edge> induced, induced_local;
    for (const auto& e : g.edges())
        if (local[e.u] >= 0 && local[e.v] >= 0) {
            induced.push_back(e);
            induced_local.push_back(make_edge(local[e.u], local[e.v]));
        }
    const CycleBasis small = star_basis(Graph(static_cast<int>(global.size()), induced_local), 0);
    std::vector<Cycle> cycles;
    for (const auto& c : small.cycles()) {
        std::vector<Vertex> vs;
        for (Vertex v : c.vertices())
            vs.push_back(global[v]);
        cycles.emplace_back(std::move(vs));
    }
    return CycleBasis(Graph(n, std::move(induced)), std::move(cycles));
}

CycleBasis grid_partial_tr_basis(const Graph& g, int rows, int cols)
{
    if (g.num_vertices() != rows * cols)
        throw ValidationError("grid partial-TR basis: vertex count does not match the grid");
    const CycleBasis faces = grid_face_basis(rows, cols);
    for (const auto& e : faces.host().edges())
        if (!g.has_edge(e.u, e.v))
            throw ValidationError("grid partial-TR basis: graph lacks grid edge " + to_string(e));
    return construct_basis(g, faces);
}

std::vector<ExperimentRow> exp_partial_ktree(int n, int K, const std::vector<double>& connectivity, int M,
                                             double sigma_h, double sigma_w, std::uint64_t seed,
                                             const ExperimentOptions& opts)
{
    check_common(M, sigma_h, sigma_w);
    const int C = static_cast<int>(connectivity.size());
    std::vector<std::vector<ExperimentRow>> parts(static_cast<std::size_t>(M) * C);
    parallel_for(M * C, opts.jobs, [&](int unit) {
        const int m = unit / C;
        const double conn = connectivity[unit % C];
        const std::uint64_t iseed = seed ^ static_cast<std::uint64_t>(m);
        const Graph g = partial_ktree_with_redraws(n, K, conn, derive_seed(iseed, kStreamGraph));
        const MarkovNet model = random_instance(g, sigma_h, sigma_w, derive_seed(iseed, kStreamModel));
        const auto exact = maybe_exact(model, opts);
        const CycleBasis partial = construct_basis(g, neighborhood_star_core(g));
        const CycleBasis fcb = construct_basis(g);
        auto& rows = parts[unit];
        rows.push_back(score("partial_ktree", iseed, conn, "gbp_partial_tr", run_gbp(build_loop_srg(g, partial), model, opts.gbp),
                             exact, n));
        rows.push_back(score("partial_ktree", iseed, conn, "gbp_fcb", run_gbp(build_loop_srg(g, fcb), model, opts.gbp), exact, n));
        rows.push_back(score("partial_ktree", iseed, conn, "bp", run_bp(model, opts.gbp), exact, n));
    });
    return flatten(std::move(parts));
}

std::vector<ExperimentRow> exp_grid_longrange(int rows, int cols, const std::vector<int>& extra, int M,
                                              double sigma_h, double sigma_w, std::uint64_t seed,
                                              const ExperimentOptions& opts)
{
    check_common(M, sigma_h, sigma_w);
    const int X = static_cast<int>(extra.size());
    const int n = rows * cols;
    std::vector<std::vector<ExperimentRow>> parts(static_cast<std::size_t>(M) * X);
    parallel_for(M * X, opts.jobs, [&](int unit) {
        const int m = unit / X;
        const int k = extra[unit % X];
        const std::uint64_t iseed = seed ^ static_cast<std::uint64_t>(m);
        const Graph g = gen_grid_longrange(rows, cols, k, derive_seed(iseed, kStreamGraph));
        const MarkovNet model = random_instance(g, sigma_h, sigma_w, derive_seed(iseed, kStreamModel));
        const auto exact = maybe_exact(model, opts);
        const CycleBasis partial = grid_partial_tr_basis(g, rows, cols);
        const CycleBasis fcb = construct_basis(g);
        auto& out = parts[unit];
        const double p = k;
        out.push_back(score("grid_longrange", iseed, p, "gbp_partial_tr", run_gbp(build_loop_srg(g, partial), model, opts.gbp),
                            exact, n));
        out.push_back(score("grid_longrange", iseed, p, "gbp_fcb", run_gbp(build_loop_srg(g, fcb), model, opts.gbp), exact, n));
        out.push_back(score("grid_longrange", iseed, p, "bp", run_bp(model, opts.gbp), exact, n));
    });
    return flatten(std::move(parts));
}

// --- parameter documents ------------------------------------------------------

namespace {

template <class T>
T field(const nlohmann::json& params, const char* key, T fallback)
{
    if (!params.contains(key))
        return fallback;
    try {
        return params.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("experiment parameter '") + key + "' has the wrong type");
    }
}

} // namespace

std::vector<ExperimentRow> run_experiment(const nlohmann::json& params, const ExperimentOptions& opts)
{
    if (!params.is_object())
        throw ValidationError("experiment parameters must be a JSON object");
    if (!params.contains("experiment") || !params["experiment"].is_string())
        throw ValidationError("experiment parameters need a string field 'experiment'");
    const bool seed_ok = params.contains("seed") && params["seed"].is_number_integer() &&
                         (params["seed"].is_number_unsigned() || params["seed"].get<std::int64_t>() >= 0);
    if (!seed_ok)
        throw ValidationError("experiment parameters need a non-negative integer 'seed'");
    const std::string name = params["experiment"].get<std::string>();
    const auto seed = params["seed"].get<std::uint64_t>();
    const int M = field<int>(params, "M", 100);
    const double sigma_h = field<double>(params, "sigma_h", 1.0);
    if (name == "star_perturbation") {
        return exp_star_perturbation(field<int>(params, "n", 10), M, field<int>(params, "steps", 15), sigma_h,
                                     field<double>(params, "sigma_w", 1.0 / 3.0), seed, opts);
    }
    if (name == "partial_ktree") {
        return exp_partial_ktree(field<int>(params, "n", 18), field<int>(params, "K", 4),
                                 field<std::vector<double>>(params, "connectivity", {0.4, 0.6, 0.8, 1.0}), M, sigma_h,
                                 field<double>(params, "sigma_w", 0.3), seed, opts);
    }
    if (name == "grid_longrange") {
        return exp_grid_longrange(field<int>(params, "rows", 4), field<int>(params, "cols", 4),
                                  field<std::vector<int>>(params, "extra", {0, 2, 4, 6, 8}), M, sigma_h,
                                  field<double>(params, "sigma_w", 0.5), seed, opts);
    }
    throw ValidationError("unknown experiment '" + name + "'");
}

} // namespace loopsrg
