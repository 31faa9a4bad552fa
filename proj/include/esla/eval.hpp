// Seeded benchmark harness: paired multi-trial runs, summary statistics,
// signed-rank significance tests, q sweeps, and two-dimensional descent
// traces. All outputs are deterministic for a given (problem, seed, trials).

#pragma once

#include "esla/data.hpp"
#include "esla/optim.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esla {

struct TrialResult {
    std::string problem;
    Algo algorithm = Algo::rprop;
    std::uint64_t seed = 0;
    int epochs = 0;
    bool converged = false;
    double generalization = 0.0; // percent correct on the held-out set
    double final_energy = 0.0;
    std::string diagnostic; // non-empty if the trial aborted
};

struct BenchmarkSummary {
    Algo algorithm = Algo::rprop;
    int n_trials = 0;
    int n_converged = 0;
    double convergence_pct = 0.0;
    double mean_epochs = 0.0;         // over converged trials; NaN when none
    double mean_generalization = 0.0; // over converged trials; NaN when none
    double performance_value = 0.0;   // 0 when nothing converged
};

// convergence% * generalization% / 100; both arguments must lie in [0,100]
double performance(double convergence_pct, double mean_generalization);

struct WilcoxonResult {
    double statistic = 0.0; // min(W+, W-) over non-zero differences
    double p_value = 1.0;   // two-sided
    bool significant = false; // p < 0.05
    int n_pairs = 0;          // non-zero differences used
};

// Paired two-sided signed-rank test. Zero differences are dropped and ties
// get average ranks; the exact null distribution is used up to 20 pairs,
// the normal approximation with tie and continuity corrections beyond.
// Throws std::invalid_argument if fewer than 5 non-zero differences remain.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct BenchProblem {
    std::string name;
    Topology topo;
    OptimizerConfig cfg; // algorithm field is overridden per run
    Dataset data;
    // fixed evaluation: train on train_idx, generalize on test_idx
    // (an empty index list means "all patterns")
    std::vector<int> train_idx, test_idx;
    // cross-validation: when folds is non-empty, trial t trains on all
    // folds except fold (t mod k) and generalizes on that fold
    FoldPlan folds;
    double init_range = 0.5;
};

// Runs n_trials independent trials per algorithm. Trial t starts every
// algorithm from the identical network drawn with seed base_seed + t, so
// results pair across algorithms trial-by-trial. jobs > 1 distributes
// trials over worker threads; results are identical for any jobs value.
std::vector<TrialResult> run_benchmark(const BenchProblem& prob, std::span<const Algo> algos,
                                       int n_trials, std::uint64_t base_seed, int jobs = 1);

// per-algorithm aggregates, in first-appearance order
std::vector<BenchmarkSummary> summarize(std::span<const TrialResult> results);

// Signed-rank comparisons of every algorithm against a reference: epochs
// and generalization paired over trials where both converged, convergence
// over per-trial 0/1 outcomes. Entries without 5 non-zero differences are
// left empty. mean_delta_* carry the paired mean difference (algo - ref)
// so callers can report direction.
struct SignificanceMarks {
    Algo algorithm = Algo::rprop;
    std::optional<WilcoxonResult> epochs, generalization, convergence;
    double mean_delta_epochs = 0.0, mean_delta_generalization = 0.0, mean_delta_convergence = 0.0;
};

std::vector<SignificanceMarks> significance_vs(std::span<const TrialResult> results, Algo reference);

struct SweepRow {
    double q = 0.0;
    double convergence_pct = 0.0;
    double mean_epochs = 0.0;
    double mean_generalization = 0.0;
};

// Re-runs the benchmark for one algorithm across a grid of entropic
// indices; every grid point must be admissible for that algorithm.
std::vector<SweepRow> sweep_q(const BenchProblem& prob, Algo algorithm,
                              std::span<const double> grid, int n_trials,
                              std::uint64_t base_seed, int jobs = 1);

// --- two-dimensional test surfaces ---

struct Function2D {
    std::function<double(double, double)> f;
    // optional analytic gradient; central differences are used when absent
    std::function<std::array<double, 2>(double, double)> grad;
};

// Three gaussian wells of depth 1.0 / 0.7 / 0.6 at (2,2), (-2,1), (0,-2)
// on a unit plateau: a global minimum and two shallower traps.
Function2D three_basin();

struct Trajectory {
    Algo algorithm = Algo::rprop;
    // one row per epoch: w1, w2, f(w1,w2); the last row is the final point
    std::vector<std::array<double, 3>> points;
};

// Runs the chosen optimizer on the surface from the given start and records
// the visited points.
Trajectory descend_surface(const Function2D& fn, std::array<double, 2> start, Algo algorithm,
                           const OptimizerConfig& cfg, std::uint64_t seed);

// --- deterministic writers ---

void write_results_csv(const std::string& path, std::span<const TrialResult> results);
void write_summary_csv(const std::string& path, std::span<const BenchmarkSummary> summaries);
// aligned text table; marks may be empty
std::string format_summary_table(const std::string& problem, std::span<const BenchmarkSummary> summaries,
                                 std::span<const SignificanceMarks> marks, Algo reference);
void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows);
void write_trajectory_csv(const std::string& path, const Trajectory& t);

} // namespace esla
