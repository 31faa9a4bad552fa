#include "esla/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

namespace esla {

double performance(double convergence_pct, double mean_generalization) {
    if (!(convergence_pct >= 0.0 && convergence_pct <= 100.0))
        throw std::invalid_argument("performance: convergence must lie in [0,100]");
    if (!(mean_generalization >= 0.0 && mean_generalization <= 100.0))
        throw std::invalid_argument("performance: generalization must lie in [0,100]");
    return convergence_pct * mean_generalization / 100.0;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("wilcoxon: samples must pair up");
    struct Diff {
        double mag;
        int sign;
    };
    std::vector<Diff> diffs;
    diffs.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (!std::isfinite(d))
            throw std::invalid_argument("wilcoxon: non-finite difference");
        if (d != 0.0)
            diffs.push_back({std::abs(d), d > 0.0 ? 1 : -1});
    }
    const std::size_t n = diffs.size();
    if (n < 5)
        throw std::invalid_argument("wilcoxon: fewer than 5 non-zero differences");

    std::sort(diffs.begin(), diffs.end(), [](const Diff& x, const Diff& y) { return x.mag < y.mag; });

    // doubled ranks stay integral under average-rank tie handling:
    // a tie run occupying positions i+1..j gets doubled rank i+1+j
    std::vector<long long> rank2(n);
    double tie_correction = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && diffs[j].mag == diffs[i].mag)
            ++j;
        const long long r2 = static_cast<long long>(i) + 1 + static_cast<long long>(j);
        for (std::size_t t = i; t < j; ++t)
            rank2[t] = r2;
        const double len = static_cast<double>(j - i);
        tie_correction += len * len * len - len;
        i = j;
    }

    long long wplus2 = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (diffs[i].sign > 0)
            wplus2 += rank2[i];
    const long long total2 = static_cast<long long>(n) * (static_cast<long long>(n) + 1);
    const long long stat2 = std::min(wplus2, total2 - wplus2);

    WilcoxonResult res;
    res.statistic = static_cast<double>(stat2) / 2.0;
    res.n_pairs = static_cast<int>(n);

    if (n <= 20) {
        // exact null distribution: subset-sum counts over the doubled ranks
        // (counts reach at most 2^20, exactly representable)
        std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
        count[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const long long r = rank2[i];
            for (long long s = total2 - r; s >= 0; --s)
                if (count[static_cast<std::size_t>(s)] != 0.0)
                    count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
        }
        double cum = 0.0;
        for (long long s = 0; s <= stat2; ++s)
            cum += count[static_cast<std::size_t>(s)];
        res.p_value = std::min(1.0, 2.0 * cum / std::ldexp(1.0, static_cast<int>(n)));
    } else {
        const double nn = static_cast<double>(n);
        const double mu = nn * (nn + 1.0) / 4.0;
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_correction / 48.0;
        const double z = (res.statistic - mu + 0.5) / std::sqrt(var);
        res.p_value = std::min(1.0, std::erfc(-z / std::sqrt(2.0)));
    }
    res.significant = res.p_value < 0.05;
    return res;
}

std::vector<TrialResult> run_benchmark(const BenchProblem& prob, std::span<const Algo> algos,
                                       int n_trials, std::uint64_t base_seed, int jobs) {
    if (algos.empty())
        throw std::invalid_argument("run_benchmark: no algorithms given");
    if (n_trials < 1)
        throw std::invalid_argument("run_benchmark: need at least one trial");
    prob.topo.validate();
    prob.data.validate();
    if (prob.data.n_inputs() != prob.topo.n_inputs() || prob.data.n_outputs() != prob.topo.n_outputs())
        throw std::invalid_argument("run_benchmark: dataset does not match topology");
    for (Algo a : algos) {
        OptimizerConfig c = prob.cfg;
        c.algorithm = a;
        c.validate();
    }

    // materialize every train/test pair once, up front
    std::vector<Dataset> train_sets, test_sets;
    const bool cv = !prob.folds.folds.empty();
    if (cv) {
        for (std::size_t f = 0; f < prob.folds.folds.size(); ++f) {
            SplitIndices sp = fold_split(prob.folds, static_cast<int>(f));
            train_sets.push_back(subset(prob.data, sp.train));
            test_sets.push_back(subset(prob.data, sp.test));
        }
    } else {
        train_sets.push_back(prob.train_idx.empty() ? prob.data : subset(prob.data, prob.train_idx));
        test_sets.push_back(prob.test_idx.empty() ? prob.data : subset(prob.data, prob.test_idx));
    }

    const std::size_t total = algos.size() * static_cast<std::size_t>(n_trials);
    std::vector<TrialResult> results(total);
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (std::size_t task = next.fetch_add(1); task < total; task = next.fetch_add(1)) {
            const std::size_t a = task / static_cast<std::size_t>(n_trials);
            const int t = static_cast<int>(task % static_cast<std::size_t>(n_trials));
            const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(t);
            const std::size_t set = cv ? static_cast<std::size_t>(t) % train_sets.size() : 0;

            OptimizerConfig cfg = prob.cfg;
            cfg.algorithm = algos[a];
            Network net = init_weights(prob.topo, seed, prob.init_range);
            const TrainReport rep = train(net, train_sets[set], cfg, seed);

            TrialResult& r = results[task];
            r.problem = prob.name;
            r.algorithm = algos[a];
            r.seed = seed;
            r.epochs = rep.epochs_run;
            r.converged = rep.converged;
            r.final_energy = rep.final_energy;
            r.generalization = net.finite() ? classify(net, test_sets[set]) : 0.0;
            r.diagnostic = rep.diagnostic;
        }
    };

    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    const int nj = std::clamp(jobs, 1, std::max(1, hw > 0 ? hw : 8));
    if (nj == 1 || total == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nj));
        for (int i = 0; i < nj; ++i)
            pool.emplace_back(worker);
        for (std::thread& th : pool)
            th.join();
    }
    return results;
}

std::vector<BenchmarkSummary> summarize(std::span<const TrialResult> results) {
    std::vector<BenchmarkSummary> out;
    auto slot = [&](Algo a) -> BenchmarkSummary& {
        for (BenchmarkSummary& s : out)
            if (s.algorithm == a)
                return s;
        out.push_back({});
        out.back().algorithm = a;
        return out.back();
    };
    std::map<Algo, std::pair<double, double>> sums; // epochs, generalization over converged
    for (const TrialResult& r : results) {
        BenchmarkSummary& s = slot(r.algorithm);
        ++s.n_trials;
        if (r.converged) {
            ++s.n_converged;
            sums[r.algorithm].first += r.epochs;
            sums[r.algorithm].second += r.generalization;
        }
    }
    for (BenchmarkSummary& s : out) {
        s.convergence_pct = 100.0 * s.n_converged / s.n_trials;
        if (s.n_converged > 0) {
            s.mean_epochs = sums[s.algorithm].first / s.n_converged;
            s.mean_generalization = sums[s.algorithm].second / s.n_converged;
            s.performance_value = performance(s.convergence_pct, s.mean_generalization);
        } else {
            s.mean_epochs = std::numeric_limits<double>::quiet_NaN();
            s.mean_generalization = std::numeric_limits<double>::quiet_NaN();
            s.performance_value = 0.0;
        }
    }
    return out;
}

namespace {

std::optional<WilcoxonResult> try_wilcoxon(std::span<const double> a, std::span<const double> b) {
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        nonzero += a[i] != b[i];
    if (nonzero < 5)
        return std::nullopt;
    return wilcoxon_signed_rank(a, b);
}

double mean_delta(std::span<const double> a, std::span<const double> b) {
    if (a.empty())
        return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] - b[i];
    return s / static_cast<double>(a.size());
}

} // namespace

std::vector<SignificanceMarks> significance_vs(std::span<const TrialResult> results, Algo reference) {
    // bucket trials per algorithm, preserving first-appearance order
    std::vector<Algo> order;
    std::map<Algo, std::vector<const TrialResult*>> by_algo;
    for (const TrialResult& r : results) {
        if (!by_algo.count(r.algorithm))
            order.push_back(r.algorithm);
        by_algo[r.algorithm].push_back(&r);
    }
    if (!by_algo.count(reference))
        throw std::invalid_argument("significance_vs: reference algorithm missing from results");
    const std::vector<const TrialResult*>& ref = by_algo[reference];

    std::vector<SignificanceMarks> out;
    for (Algo a : order) {
        if (a == reference)
            continue;
        const std::vector<const TrialResult*>& cur = by_algo[a];
        if (cur.size() != ref.size())
            throw std::invalid_argument("significance_vs: trial counts differ between algorithms");
        SignificanceMarks m;
        m.algorithm = a;
        std::vector<double> ea, eb, ga, gb, ca, cb;
        for (std::size_t t = 0; t < cur.size(); ++t) {
            if (cur[t]->seed != ref[t]->seed)
                throw std::invalid_argument("significance_vs: trials do not pair by seed");
            ca.push_back(cur[t]->converged ? 1.0 : 0.0);
            cb.push_back(ref[t]->converged ? 1.0 : 0.0);
            if (cur[t]->converged && ref[t]->converged) {
                ea.push_back(cur[t]->epochs);
                eb.push_back(ref[t]->epochs);
                ga.push_back(cur[t]->generalization);
                gb.push_back(ref[t]->generalization);
            }
        }
        m.epochs = try_wilcoxon(ea, eb);
        m.generalization = try_wilcoxon(ga, gb);
        m.convergence = try_wilcoxon(ca, cb);
        m.mean_delta_epochs = mean_delta(ea, eb);
        m.mean_delta_generalization = mean_delta(ga, gb);
        m.mean_delta_convergence = mean_delta(ca, cb);
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<SweepRow> sweep_q(const BenchProblem& prob, Algo algorithm,
                              std::span<const double> grid, int n_trials,
                              std::uint64_t base_seed, int jobs) {
    if (grid.empty())
        throw std::invalid_argument("sweep_q: empty grid");
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    const Algo algos[1] = {algorithm};
    for (double q : grid) {
        BenchProblem p = prob;
        p.cfg.schedule.q = q;
        p.cfg.algorithm = algorithm;
        p.cfg.validate(); // rejects inadmissible q for the algorithm up front
        std::vector<TrialResult> res = run_benchmark(p, algos, n_trials, base_seed, jobs);
        std::vector<BenchmarkSummary> sum = summarize(res);
        SweepRow row;
        row.q = q;
        row.convergence_pct = sum[0].convergence_pct;
        row.mean_epochs = sum[0].mean_epochs;
        row.mean_generalization = sum[0].mean_generalization;
        rows.push_back(row);
    }
    return rows;
}

Function2D three_basin() {
    struct Well {
        double x, y, depth, width;
    };
    static constexpr Well wells[3] = {
        {2.0, 2.0, 1.0, 0.5},   // global basin
        {-2.0, 1.0, 0.7, 0.5},  // local trap
        {0.0, -2.0, 0.6, 0.3},  // shallower, narrower trap
    };
    Function2D fn;
    fn.f = [](double w1, double w2) {
        double v = 1.0;
        for (const Well& w : wells) {
            const double dx = w1 - w.x, dy = w2 - w.y;
            v -= w.depth * std::exp(-(dx * dx + dy * dy) / w.width);
        }
        return v;
    };
    fn.grad = [](double w1, double w2) {
        double gx = 0.0, gy = 0.0;
        for (const Well& w : wells) {
            const double dx = w1 - w.x, dy = w2 - w.y;
            const double e = w.depth * std::exp(-(dx * dx + dy * dy) / w.width);
            gx += e * 2.0 * dx / w.width;
            gy += e * 2.0 * dy / w.width;
        }
        return std::array<double, 2>{gx, gy};
    };
    return fn;
}

namespace {

class SurfaceObjective final : public Objective {
  public:
    explicit SurfaceObjective(const Function2D& fn) : fn_(fn) {
        if (!fn_.f)
            throw std::invalid_argument("surface: missing function");
    }
    std::size_t dim() const override { return 2; }
    double value(std::span<const double> w) const override { return fn_.f(w[0], w[1]); }
    double value_and_gradient(std::span<const double> w, std::vector<double>& g) const override {
        g.resize(2);
        if (fn_.grad) {
            const std::array<double, 2> a = fn_.grad(w[0], w[1]);
            g[0] = a[0];
            g[1] = a[1];
        } else {
            for (int i = 0; i < 2; ++i) {
                const double h = 1e-6 * (1.0 + std::abs(w[i]));
                double lo[2] = {w[0], w[1]}, hi[2] = {w[0], w[1]};
                lo[i] -= h;
                hi[i] += h;
                g[i] = (fn_.f(hi[0], hi[1]) - fn_.f(lo[0], lo[1])) / (2.0 * h);
            }
        }
        return fn_.f(w[0], w[1]);
    }

  private:
    const Function2D& fn_;
};

} // namespace

Trajectory descend_surface(const Function2D& fn, std::array<double, 2> start, Algo algorithm,
                           const OptimizerConfig& cfg, std::uint64_t seed) {
    SurfaceObjective obj(fn);
    OptimizerConfig c = cfg;
    c.algorithm = algorithm;
    c.record_weight_trace = true;
    std::vector<double> w = {start[0], start[1]};
    const TrainReport rep = train_objective(w, obj, c, seed);

    Trajectory traj;
    traj.algorithm = algorithm;
    traj.points.reserve(rep.weight_trace.size());
    for (std::size_t i = 0; i < rep.weight_trace.size(); ++i) {
        const double f = i < rep.energy_trace.size() ? rep.energy_trace[i] : rep.final_energy;
        traj.points.push_back({rep.weight_trace[i][0], rep.weight_trace[i][1], f});
    }
    return traj;
}

// ---------------------------------------------------------------- writers

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    return out;
}

std::string fmt(const char* format, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

} // namespace

void write_results_csv(const std::string& path, std::span<const TrialResult> results) {
    std::ofstream out = open_out(path);
    out << "problem,algorithm,seed,epochs,converged,generalization,final_energy\n";
    for (const TrialResult& r : results) {
        out << r.problem << ',' << to_string(r.algorithm) << ',' << r.seed << ',' << r.epochs << ','
            << (r.converged ? 1 : 0) << ',' << fmt("%.10g", r.generalization) << ','
            << fmt("%.17g", r.final_energy) << '\n';
    }
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

void write_summary_csv(const std::string& path, std::span<const BenchmarkSummary> summaries) {
    std::ofstream out = open_out(path);
    out << "algorithm,trials,converged,convergence_pct,mean_epochs,mean_generalization,performance\n";
    for (const BenchmarkSummary& s : summaries) {
        out << to_string(s.algorithm) << ',' << s.n_trials << ',' << s.n_converged << ','
            << fmt("%.10g", s.convergence_pct) << ',' << fmt("%.10g", s.mean_epochs) << ','
            << fmt("%.10g", s.mean_generalization) << ',' << fmt("%.10g", s.performance_value)
            << '\n';
    }
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

std::string format_summary_table(const std::string& problem, std::span<const BenchmarkSummary> summaries,
                                 std::span<const SignificanceMarks> marks, Algo reference) {
    auto mark_for = [&](Algo a, int metric) -> std::string {
        for (const SignificanceMarks& m : marks) {
            if (m.algorithm != a)
                continue;
            const std::optional<WilcoxonResult>* w = nullptr;
            double delta = 0.0;
            switch (metric) {
            case 0: w = &m.convergence; delta = m.mean_delta_convergence; break;
            case 1: w = &m.epochs; delta = m.mean_delta_epochs; break;
            default: w = &m.generalization; delta = m.mean_delta_generalization; break;
            }
            if (w->has_value() && (*w)->significant)
                return delta > 0.0 ? " (+)" : " (-)";
            return "    ";
        }
        return "    ";
    };

    std::string s = "problem: " + problem + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %10s %16s %16s %12s\n", "algorithm", "conv%",
                  "mean-epochs", "mean-gen%", "performance");
    s += line;
    for (const BenchmarkSummary& sm : summaries) {
        const std::string conv = fmt("%.1f", sm.convergence_pct) + mark_for(sm.algorithm, 0);
        const std::string ep =
            (sm.n_converged ? fmt("%.1f", sm.mean_epochs) : std::string("-")) + mark_for(sm.algorithm, 1);
        const std::string gen = (sm.n_converged ? fmt("%.1f", sm.mean_generalization) : std::string("-")) +
                                mark_for(sm.algorithm, 2);
        std::snprintf(line, sizeof line, "%-10s %10s %16s %16s %12s\n", to_string(sm.algorithm),
                      conv.c_str(), ep.c_str(), gen.c_str(), fmt("%.1f", sm.performance_value).c_str());
        s += line;
    }
    s += "(+)/(-): significantly higher/lower than ";
    s += to_string(reference);
    s += " (paired signed-rank, p < 0.05)\n";
    return s;
}

void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows) {
    std::ofstream out = open_out(path);
    out << "q,convergence_pct,mean_epochs,mean_generalization\n";
    for (const SweepRow& r : rows)
        out << fmt("%.10g", r.q) << ',' << fmt("%.10g", r.convergence_pct) << ','
            << fmt("%.10g", r.mean_epochs) << ',' << fmt("%.10g", r.mean_generalization) << '\n';
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

void write_trajectory_csv(const std::string& path, const Trajectory& t) {
    std::ofstream out = open_out(path);
    out << "epoch,w1,w2,f\n";
    for (std::size_t i = 0; i < t.points.size(); ++i)
        out << (i + 1) << ',' << fmt("%.17g", t.points[i][0]) << ',' << fmt("%.17g", t.points[i][1])
            << ',' << fmt("%.17g", t.points[i][2]) << '\n';
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

} // namespace esla
