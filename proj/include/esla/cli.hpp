// Command-line front end: subcommands train / bench / sweep / landscape /
// validate-data, a built-in problem registry, and three-layer option
// resolution (defaults, then --config file, then explicit flags).

#pragma once

#include "esla/eval.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esla {

struct ProblemPreset {
    const char* name;
    const char* topology;
    const char* activation;
    double error_target;
    double q;
    bool needs_file; // dataset comes from --data rather than a generator
    bool kfold;      // stratified 10-fold protocol instead of a fixed split
};

std::span<const ProblemPreset> problem_presets();
const ProblemPreset* find_preset(const std::string& name); // nullptr if unknown

// One subcommand invocation after CLI11 parsing, before preset resolution.
// NaN / empty fields mean "not given" and fall back to the preset (or the
// global default) during resolution.
struct RunConfig {
    std::string command;

    std::string problem;
    std::string data_path;
    std::string topology;
    std::string activation;
    std::vector<std::string> algorithms;

    double q = std::numeric_limits<double>::quiet_NaN();
    double t0 = std::numeric_limits<double>::quiet_NaN();
    double error_target = std::numeric_limits<double>::quiet_NaN();

    double mu_prime = 0.01;
    double rho = 0.5;
    double eta_plus = 1.2;
    double eta_minus = 0.5;
    double delta0 = 0.1;
    double delta_min = 1e-6;
    double delta_max = 50.0;
    double tau = 1.0;

    int max_epochs = 2000;
    int trials = 30;
    int jobs = 0; // 0 = one worker per available core
    std::uint64_t seed = 1;
    bool backtracking = false;

    std::string out_dir = ".";
    std::string q_grid;                       // sweep: "start:step:stop" or comma list
    std::vector<double> start = {-0.5, 2.5};  // landscape start, beside the col between wells
};

// Parse argv into a RunConfig without executing the command; exposed so the
// resolution order (defaults < config file < flags) is directly testable.
// Throws CLI::ParseError (usage) via exit_code when parsing itself ends the
// program (--help); otherwise returns the populated config.
struct ParseOutcome {
    std::optional<RunConfig> config; // empty when CLI11 finished the run itself
    int exit_code = 0;               // meaningful when config is empty
};
ParseOutcome parse_cli(std::span<const char* const> args);

// Fill preset/global defaults into unset fields and sanity-check the
// combination; throws std::invalid_argument on bad combinations.
void resolve_config(RunConfig& rc);

// "1.1:0.1:2.3" or "1.2,1.6,2.0" -> grid values; throws on malformed text
std::vector<double> parse_q_grid(const std::string& text);

// Build the benchmark problem a resolved config describes (loads or
// generates the dataset, prepares split or folds).
BenchProblem build_problem(const RunConfig& rc);

// Full dispatch. Exit codes: 0 success, 1 usage/config error, 2 data file
// error, 3 runtime failure (non-finite abort, unwritable output).
int run_cli(int argc, const char* const* argv);

} // namespace esla
