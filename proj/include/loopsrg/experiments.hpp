#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "loopsrg/cycle_bases.hpp"
#include "loopsrg/inference.hpp"

namespace loopsrg {

struct ErrorPair {
    double error_z = 0.0;
    // (1/n) sum_i sum_{x_i} |b(x_i) - p(x_i)|, both states summed.
    double error_l1 = 0.0;
};

ErrorPair error_metrics(const BeliefState& approx, const ExactResult& exact, int n);

struct ExperimentRow {
    std::string experiment;
    std::uint64_t seed = 0;
    double param = 0.0;
    std::string method;
    // Empty when the instance is beyond the exact oracle's cap.
    std::optional<double> error_z;
    std::optional<double> error_l1;
    int iterations = 0;
    bool converged = false;
};

// Shared knobs. `jobs` only affects wall time, never the rows.
struct ExperimentOptions {
    GbpOptions gbp;
    int jobs = 1;
    // Oracle cap; instances with more variables get empty error fields.
    int exact_cap = kDefaultExactCap;
};

// Star basis of g at `root`, followed by `steps` bases each replacing one
// not-yet-modified triangle (root, u, v) with (w, u, v). Swaps that break
// fundamentality (or independence) are rejected and redrawn, up to 100
// times per step.
std::vector<CycleBasis> perturb_star_sequence(const Graph& g, Vertex root, int steps, std::uint64_t seed);

// K_n with M random instances scored against every basis of one shared
// perturbation sequence rooted at vertex 0. Method gbp_tr at step 0,
// gbp_partial_tr afterwards; param = step.
std::vector<ExperimentRow> exp_star_perturbation(int n, int M, int steps, double sigma_h, double sigma_w,
                                                 std::uint64_t seed, const ExperimentOptions& opts = {});

// Partial K-trees; per instance and connectivity: gbp_partial_tr (star core
// at the max-degree vertex, extended by construct_basis), gbp_fcb
// (construct_basis from scratch) and bp. param = connectivity. A graph draw
// that cannot reach the connectivity threshold is redrawn from a derived
// seed, up to 20 times.
std::vector<ExperimentRow> exp_partial_ktree(int n, int K, const std::vector<double>& connectivity, int M,
                                             double sigma_h, double sigma_w, std::uint64_t seed,
                                             const ExperimentOptions& opts = {});

// Grids with `extra` random long-range edges; gbp_partial_tr (face core
// extended by construct_basis), gbp_fcb and bp. param = extra.
std::vector<ExperimentRow> exp_grid_longrange(int rows, int cols, const std::vector<int>& extra, int M,
                                              double sigma_h, double sigma_w, std::uint64_t seed,
                                              const ExperimentOptions& opts = {});

// Core used by the partial K-tree experiment: the star basis of the
// subgraph induced by the closed neighborhood of the lowest-numbered
// max-degree vertex, on g's vertex set.
CycleBasis neighborhood_star_core(const Graph& g);

// Partial-TR basis of grid_graph(rows, cols) plus extra edges: faces first.
CycleBasis grid_partial_tr_basis(const Graph& g, int rows, int cols);

// Runs a driver described by a parameter document:
//   {"experiment": "star_perturbation" | "partial_ktree" | "grid_longrange",
//    "seed": ..., plus the driver's own fields}
// Missing fields take desk defaults; "seed" is required.
std::vector<ExperimentRow> run_experiment(const nlohmann::json& params, const ExperimentOptions& opts = {});

// --- CSV ------------------------------------------------------------------

inline constexpr const char* kCsvHeader = "experiment,seed,param,method,error_z,error_l1,iterations,converged";

// Rows sorted by (seed, param, method); reals with 10 significant digits.
std::string format_csv(std::vector<ExperimentRow> rows);
void write_csv(const std::vector<ExperimentRow>& rows, const std::string& path);
std::vector<ExperimentRow> parse_csv(const std::string& text, const std::string& origin = "<text>");
std::vector<ExperimentRow> read_csv(const std::string& path);

} // namespace loopsrg
