#include "esla/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

namespace esla {

namespace {

const ProblemPreset kPresets[] = {
    // name        topology     activation  target   q    file   kfold
    {"xor", "2-2-1", "tansig", 1e-5, 2.1, false, false},
    {"parity3", "3-3-1", "tansig", 5e-5, 1.1, false, false},
    {"diabetes", "8-2-2-2", "logistic", 0.14, 1.6, true, false},
    {"cancer", "9-4-2-2", "logistic", 0.02, 1.7, true, false},
    {"thyroid", "21-16-8-3", "logistic", 0.0036, 1.7, true, false},
    {"yeast", "8-16-10", "logistic", 0.05, 1.6, true, true},
};

constexpr int kYeastFolds = 10;

bool unset(double v) { return std::isnan(v); }

std::string trimmed(std::string s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos)
        return {};
    return s.substr(from, s.find_last_not_of(" \t\r") - from + 1);
}

// Apply a flat key=value file to the parsed subcommand. Keys mirror flag
// names without the leading dashes; values set only options the command line
// left untouched, so explicit flags keep precedence. Returns an error
// message, or empty on success.
std::string apply_config_file(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in)
        return "cannot open config file '" + path + "'";
    std::vector<std::pair<std::string, std::string>> items;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trimmed(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            return path + " line " + std::to_string(lineno) + ": expected key=value";
        std::string key = trimmed(line.substr(0, eq));
        std::string value = trimmed(line.substr(eq + 1));
        if (key.empty())
            return path + " line " + std::to_string(lineno) + ": empty key";
        for (const auto& existing : items)
            if (existing.first == key)
                return path + ": duplicate config key '" + key + "'";
        items.emplace_back(std::move(key), std::move(value));
    }
    for (const auto& [key, value] : items) {
        CLI::Option* op = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
        if (op == nullptr)
            return "unknown config key '" + key + "'";
        if (op->count() > 0)
            continue;
        try {
            op->add_result(value);
            op->run_callback();
        } catch (const CLI::Error& e) {
            return "config key '" + key + "': " + e.what();
        }
    }
    return {};
}

} // namespace

std::span<const ProblemPreset> problem_presets() { return kPresets; }

const ProblemPreset* find_preset(const std::string& name) {
    for (const ProblemPreset& p : kPresets)
        if (name == p.name)
            return &p;
    return nullptr;
}

ParseOutcome parse_cli(std::span<const char* const> args) {
    auto rc = std::make_shared<RunConfig>();
    CLI::App app{"feedforward network training with generalized-exponential noise schedules"};
    app.require_subcommand(1);

    auto cfg_path = std::make_shared<std::string>();
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", *cfg_path, "read options from a key=value file");
        sub->add_option("--seed", rc->seed, "base seed (trial t uses seed+t)");
        sub->add_option("--out", rc->out_dir, "output directory");
    };
    auto add_model = [&](CLI::App* sub) {
        sub->add_option("--q", rc->q, "entropic index of the noise schedule");
        sub->add_option("--t0", rc->t0, "initial temperature");
        sub->add_option("--mu-prime", rc->mu_prime, "perturbation strength");
        sub->add_option("--rho", rc->rho, "stepsize floor coupling (0 disables)");
        sub->add_option("--eta-plus", rc->eta_plus, "stepsize growth factor");
        sub->add_option("--eta-minus", rc->eta_minus, "stepsize shrink factor");
        sub->add_option("--delta0", rc->delta0, "initial stepsize");
        sub->add_option("--delta-min", rc->delta_min, "smallest stepsize");
        sub->add_option("--delta-max", rc->delta_max, "largest stepsize");
        sub->add_option("--tau", rc->tau, "global step scale");
        sub->add_option("--error-target", rc->error_target, "stop when the batch error reaches this");
        sub->add_option("--max-epochs", rc->max_epochs, "epoch budget per trial");
        sub->add_flag("--backtracking", rc->backtracking, "undo a step when its gradient sign flips");
    };
    auto add_problem = [&](CLI::App* sub) {
        sub->add_option("--problem", rc->problem, "built-in problem name");
        sub->add_option("--data", rc->data_path, "dataset file (counted header + rows)");
        sub->add_option("--topology", rc->topology, "layer sizes, e.g. 8-2-2-2");
        sub->add_option("--activation", rc->activation, "logistic | tansig | linear");
    };

    CLI::App* train = app.add_subcommand("train", "train one network and save it");
    add_problem(train);
    add_model(train);
    add_common(train);
    train->add_option("--algorithm", rc->algorithms, "rprop | hls | esla");

    CLI::App* bench = app.add_subcommand("bench", "paired multi-trial comparison of the algorithms");
    add_problem(bench);
    add_model(bench);
    add_common(bench);
    bench->add_option("--algorithms", rc->algorithms, "comma-separated algorithm list")->delimiter(',');
    bench->add_option("--trials", rc->trials, "trials per algorithm");
    bench->add_option("--jobs", rc->jobs, "worker threads");

    CLI::App* sweep = app.add_subcommand("sweep", "re-run one algorithm across a grid of q values");
    add_problem(sweep);
    add_model(sweep);
    add_common(sweep);
    sweep->add_option("--algorithm", rc->algorithms, "algorithm to sweep");
    sweep->add_option("--q-grid", rc->q_grid, "start:step:stop or comma-separated q values")->required();
    sweep->add_option("--trials", rc->trials, "trials per grid point");
    sweep->add_option("--jobs", rc->jobs, "worker threads");

    CLI::App* land = app.add_subcommand("landscape", "trace the optimizers on the three-basin surface");
    add_model(land);
    add_common(land);
    land->add_option("--algorithms", rc->algorithms, "comma-separated algorithm list")->delimiter(',');
    land->add_option("--start", rc->start, "starting point w1,w2")->delimiter(',')->expected(2);

    CLI::App* val = app.add_subcommand("validate-data", "parse a dataset file and report its shape");
    val->add_option("--data", rc->data_path, "dataset file to check")->required();

    try {
        app.parse(static_cast<int>(args.size()), args.data());
    } catch (const CLI::ParseError& e) {
        ParseOutcome out;
        out.exit_code = app.exit(e) == 0 ? 0 : 1;
        return out;
    }
    for (CLI::App* sub : {train, bench, sweep, land, val}) {
        if (!sub->parsed())
            continue;
        rc->command = sub->get_name();
        if (!cfg_path->empty()) {
            const std::string err = apply_config_file(sub, *cfg_path);
            if (!err.empty()) {
                std::cerr << "error: " << err << "\n";
                ParseOutcome out;
                out.exit_code = 1;
                return out;
            }
        }
    }
    ParseOutcome out;
    out.config = *rc;
    return out;
}

void resolve_config(RunConfig& rc) {
    if (rc.command == "validate-data")
        return;

    if (rc.command == "landscape") {
        if (unset(rc.q))
            rc.q = 1.6;
        if (unset(rc.t0))
            rc.t0 = 2.0;
        if (unset(rc.error_target))
            rc.error_target = 1e-3;
        if (rc.algorithms.empty())
            rc.algorithms = {"rprop", "hls", "esla"};
    } else {
        const ProblemPreset* ps = nullptr;
        if (!rc.problem.empty()) {
            ps = find_preset(rc.problem);
            if (!ps)
                throw std::invalid_argument(
                    "unknown problem '" + rc.problem +
                    "' (built-ins: xor, parity3, diabetes, cancer, thyroid, yeast)");
        }
        if (ps) {
            if (rc.topology.empty())
                rc.topology = ps->topology;
            if (rc.activation.empty())
                rc.activation = ps->activation;
            if (unset(rc.q))
                rc.q = ps->q;
            if (unset(rc.error_target))
                rc.error_target = ps->error_target;
            if (ps->needs_file && rc.data_path.empty())
                throw std::invalid_argument("problem '" + rc.problem + "' needs --data <file>");
        } else {
            if (rc.data_path.empty())
                throw std::invalid_argument("need --problem or --data");
            if (rc.topology.empty())
                throw std::invalid_argument("custom data needs --topology");
            if (rc.activation.empty())
                rc.activation = "logistic";
            if (unset(rc.q))
                rc.q = 1.6;
            if (unset(rc.error_target))
                throw std::invalid_argument("custom data needs --error-target");
        }
        if (unset(rc.t0))
            rc.t0 = 2.0;
        if (rc.algorithms.empty()) {
            if (rc.command == "train" || rc.command == "sweep")
                rc.algorithms = {"esla"};
            else
                rc.algorithms = {"rprop", "hls", "esla"};
        }
    }

    for (const std::string& a : rc.algorithms)
        parse_algo(a); // throws on unknown names
    if ((rc.command == "train" || rc.command == "sweep") && rc.algorithms.size() != 1)
        throw std::invalid_argument(rc.command + " takes exactly one algorithm");
    if (rc.trials < 1)
        throw std::invalid_argument("--trials must be at least 1");
    if (rc.jobs == 0)
        rc.jobs = std::max(1u, std::thread::hardware_concurrency());
    if (rc.jobs < 1)
        throw std::invalid_argument("--jobs must be at least 1");
}

std::vector<double> parse_q_grid(const std::string& text) {
    auto parse_num = [&](const std::string& tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad q grid value '" + tok + "'");
        }
        if (used != tok.size() || tok.empty())
            throw std::invalid_argument("bad q grid value '" + tok + "'");
        return v;
    };
    std::vector<double> grid;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (true) {
            const std::size_t c = text.find(':', pos);
            parts.push_back(text.substr(pos, c - pos));
            if (c == std::string::npos)
                break;
            pos = c + 1;
        }
        if (parts.size() != 3)
            throw std::invalid_argument("q grid range must be start:step:stop");
        const double a = parse_num(parts[0]), s = parse_num(parts[1]), b = parse_num(parts[2]);
        if (!(s > 0.0) || b < a)
            throw std::invalid_argument("q grid range needs step > 0 and stop >= start");
        const int n = static_cast<int>(std::floor((b - a) / s + 1e-6)) + 1;
        for (int i = 0; i < n; ++i)
            grid.push_back(a + i * s);
    } else {
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t c = text.find(',', pos);
            if (c == std::string::npos)
                c = text.size();
            grid.push_back(parse_num(text.substr(pos, c - pos)));
            pos = c + 1;
            if (c == text.size())
                break;
        }
    }
    if (grid.empty())
        throw std::invalid_argument("empty q grid");
    return grid;
}

BenchProblem build_problem(const RunConfig& rc) {
    BenchProblem p;
    const Activation act = parse_activation(rc.activation);
    p.topo = parse_topology(rc.topology, act);

    OptimizerConfig& cfg = p.cfg;
    cfg.eta_plus = rc.eta_plus;
    cfg.eta_minus = rc.eta_minus;
    cfg.delta0 = rc.delta0;
    cfg.delta_min = rc.delta_min;
    cfg.delta_max = rc.delta_max;
    cfg.tau = rc.tau;
    cfg.mu_prime = rc.mu_prime;
    cfg.rho = rc.rho;
    cfg.schedule.q = rc.q;
    cfg.schedule.T0 = rc.t0;
    cfg.max_epochs = rc.max_epochs;
    cfg.error_target = rc.error_target;
    cfg.backtracking = rc.backtracking;

    const ProblemPreset* ps = rc.problem.empty() ? nullptr : find_preset(rc.problem);
    if (ps && !ps->needs_file) {
        p.name = rc.problem;
        // boolean levels follow the output activation's range
        const bool signed_levels = act != Activation::logistic;
        p.data = gen_boolean(rc.problem == "xor" ? BoolProblem::xor2 : BoolProblem::parity3,
                             signed_levels);
        // exhaustive truth table: train and evaluate on all patterns
    } else {
        LoadedData ld = load_data_file(rc.data_path);
        p.data = std::move(ld.data);
        p.name = ps ? rc.problem : std::filesystem::path(rc.data_path).stem().string();
        if (ps && ps->kfold) {
            p.folds = stratified_kfold(p.data, kYeastFolds, rc.seed);
        } else {
            p.train_idx = std::move(ld.train_idx);
            p.test_idx = std::move(ld.test_idx);
        }
    }
    return p;
}

namespace {

std::vector<Algo> algo_list(const RunConfig& rc) {
    std::vector<Algo> algos;
    algos.reserve(rc.algorithms.size());
    for (const std::string& a : rc.algorithms)
        algos.push_back(parse_algo(a));
    return algos;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

int cmd_train(const RunConfig& rc) {
    BenchProblem p = build_problem(rc);
    OptimizerConfig cfg = p.cfg;
    cfg.algorithm = parse_algo(rc.algorithms[0]);
    cfg.validate();

    // single trial: index 0 of the benchmark protocol
    Dataset train_set, test_set;
    if (!p.folds.folds.empty()) {
        SplitIndices sp = fold_split(p.folds, 0);
        train_set = subset(p.data, sp.train);
        test_set = subset(p.data, sp.test);
    } else {
        train_set = p.train_idx.empty() ? p.data : subset(p.data, p.train_idx);
        test_set = p.test_idx.empty() ? p.data : subset(p.data, p.test_idx);
    }

    Network net = init_weights(p.topo, rc.seed, p.init_range);
    const TrainReport rep = train(net, train_set, cfg, rc.seed);

    ensure_out_dir(rc.out_dir);
    save_network(net, join_path(rc.out_dir, "network.txt"));
    {
        std::ofstream out(join_path(rc.out_dir, "training.csv"));
        if (!out)
            throw std::runtime_error("cannot write training.csv");
        out << "epoch,energy\n";
        char buf[48];
        for (std::size_t i = 0; i < rep.energy_trace.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", rep.energy_trace[i]);
            out << (i + 1) << ',' << buf << '\n';
        }
    }
    const double gen = net.finite() ? classify(net, test_set) : 0.0;
    std::printf("problem=%s algorithm=%s seed=%" PRIu64
                " converged=%d epochs=%d final_energy=%.10g generalization=%.10g\n",
                p.name.c_str(), to_string(cfg.algorithm), rc.seed, rep.converged ? 1 : 0,
                rep.epochs_run, rep.final_energy, gen);
    if (!rep.diagnostic.empty()) {
        std::fprintf(stderr, "%s\n", rep.diagnostic.c_str());
        return 3;
    }
    return 0;
}

int cmd_bench(const RunConfig& rc) {
    BenchProblem p = build_problem(rc);
    const std::vector<Algo> algos = algo_list(rc);
    const std::vector<TrialResult> results = run_benchmark(p, algos, rc.trials, rc.seed, rc.jobs);
    const std::vector<BenchmarkSummary> sums = summarize(results);

    std::vector<SignificanceMarks> marks;
    const bool have_ref =
        algos.size() > 1 && std::find(algos.begin(), algos.end(), Algo::esla) != algos.end();
    if (have_ref)
        marks = significance_vs(results, Algo::esla);

    ensure_out_dir(rc.out_dir);
    write_results_csv(join_path(rc.out_dir, "results.csv"), results);
    write_summary_csv(join_path(rc.out_dir, "summary.csv"), sums);
    const std::string table = format_summary_table(p.name, sums, marks, Algo::esla);
    {
        std::ofstream out(join_path(rc.out_dir, "summary.txt"));
        if (!out)
            throw std::runtime_error("cannot write summary.txt");
        out << table;
    }
    std::cout << table;
    return 0;
}

int cmd_sweep(const RunConfig& rc) {
    BenchProblem p = build_problem(rc);
    const std::vector<double> grid = parse_q_grid(rc.q_grid);
    const Algo algo = parse_algo(rc.algorithms[0]);
    const std::vector<SweepRow> rows = sweep_q(p, algo, grid, rc.trials, rc.seed, rc.jobs);

    ensure_out_dir(rc.out_dir);
    write_sweep_csv(join_path(rc.out_dir, "sweep.csv"), rows);
    std::printf("%-8s %10s %14s %12s\n", "q", "conv%", "mean-epochs", "mean-gen%");
    for (const SweepRow& r : rows)
        std::printf("%-8.4g %10.1f %14.1f %12.1f\n", r.q, r.convergence_pct, r.mean_epochs,
                    r.mean_generalization);
    return 0;
}

int cmd_landscape(const RunConfig& rc) {
    const Function2D fn = three_basin();
    OptimizerConfig cfg;
    cfg.schedule.q = rc.q;
    cfg.schedule.T0 = rc.t0;
    cfg.mu_prime = rc.mu_prime;
    cfg.rho = rc.rho;
    cfg.eta_plus = rc.eta_plus;
    cfg.eta_minus = rc.eta_minus;
    cfg.delta0 = rc.delta0;
    cfg.delta_min = rc.delta_min;
    cfg.delta_max = rc.delta_max;
    cfg.tau = rc.tau;
    cfg.max_epochs = rc.max_epochs;
    cfg.error_target = rc.error_target;
    cfg.backtracking = rc.backtracking;

    static const struct {
        double x, y;
        const char* label;
    } kWells[] = {{2.0, 2.0, "global(2,2)"}, {-2.0, 1.0, "trap(-2,1)"}, {0.0, -2.0, "trap(0,-2)"}};

    ensure_out_dir(rc.out_dir);
    for (const std::string& name : rc.algorithms) {
        const Algo algo = parse_algo(name);
        const Trajectory traj =
            descend_surface(fn, {rc.start[0], rc.start[1]}, algo, cfg, rc.seed);
        write_trajectory_csv(join_path(rc.out_dir, "landscape_" + name + ".csv"), traj);
        const auto& last = traj.points.back();
        int nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 3; ++i) {
            const double dx = last[0] - kWells[i].x, dy = last[1] - kWells[i].y;
            if (dx * dx + dy * dy < best) {
                best = dx * dx + dy * dy;
                nearest = i;
            }
        }
        const bool settled = last[2] < 0.5; // well below the plateau at 1
        std::printf("algorithm=%-6s epochs=%zu final=(%.6g, %.6g) f=%.6g basin=%s\n", name.c_str(),
                    traj.points.size(), last[0], last[1], last[2],
                    settled ? kWells[nearest].label : "none");
    }
    return 0;
}

int cmd_validate_data(const RunConfig& rc) {
    const LoadedData ld = load_data_file(rc.data_path);
    const DatasetHeader& h = ld.header;
    std::printf("file=%s\ninputs=%d (bool=%d real=%d)\noutputs=%d (bool=%d real=%d)\n"
                "training=%d validation=%d test=%d total=%d\n",
                rc.data_path.c_str(), h.n_inputs(), h.bool_in, h.real_in, h.n_outputs(), h.bool_out,
                h.real_out, h.training_examples, h.validation_examples, h.test_examples, h.n_total());
    if (!ld.data.labels.empty()) {
        std::vector<int> seen;
        for (int l : ld.data.labels)
            if (std::find(seen.begin(), seen.end(), l) == seen.end())
                seen.push_back(l);
        std::printf("classes=%zu\n", seen.size());
    }
    std::printf("ok\n");
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    ParseOutcome po = parse_cli({argv, static_cast<std::size_t>(argc)});
    if (!po.config)
        return po.exit_code;
    RunConfig rc = *po.config;
    try {
        resolve_config(rc);
        if (rc.command == "train")
            return cmd_train(rc);
        if (rc.command == "bench")
            return cmd_bench(rc);
        if (rc.command == "sweep")
            return cmd_sweep(rc);
        if (rc.command == "landscape")
            return cmd_landscape(rc);
        if (rc.command == "validate-data")
            return cmd_validate_data(rc);
        std::fprintf(stderr, "no command given\n");
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 3;
    }
}

} // namespace esla
