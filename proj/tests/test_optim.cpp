#include "esla/optim.hpp"

#include "esla/data.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

using namespace esla;

namespace {

OptimizerConfig base_config(Algo a) {
    OptimizerConfig cfg;
    cfg.algorithm = a;
    cfg.schedule.q = 1.6;
    cfg.schedule.T0 = 2.0;
    return cfg;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// tiny smooth objective for engine-level tests: f(w) = sum (w_i - i)^2 + c
class Paraboloid final : public Objective {
  public:
    Paraboloid(std::size_t n, double floor) : n_(n), floor_(floor) {}
    std::size_t dim() const override { return n_; }
    double value(std::span<const double> w) const override {
        double s = floor_;
        for (std::size_t i = 0; i < n_; ++i)
            s += (w[i] - static_cast<double>(i)) * (w[i] - static_cast<double>(i));
        return s;
    }
    double value_and_gradient(std::span<const double> w, std::vector<double>& g) const override {
        g.resize(n_);
        for (std::size_t i = 0; i < n_; ++i)
            g[i] = 2.0 * (w[i] - static_cast<double>(i));
        return value(w);
    }

  private:
    std::size_t n_;
    double floor_;
};

// objective that turns non-finite after a few evaluations
class Exploder final : public Objective {
  public:
    std::size_t dim() const override { return 1; }
    double value(std::span<const double>) const override { return bump(); }
    double value_and_gradient(std::span<const double>, std::vector<double>& g) const override {
        g.assign(1, 1.0);
        return bump();
    }

  private:
    double bump() const {
        ++calls_;
        return calls_ > 3 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    mutable int calls_ = 0;
};

} // namespace

TEST_CASE("config validation rejects out-of-range settings") {
    OptimizerConfig cfg = base_config(Algo::rprop);
    cfg.validate();
    auto expect_throw = [](OptimizerConfig c) { CHECK_THROWS_AS(c.validate(), std::invalid_argument); };
    { OptimizerConfig c = cfg; c.eta_plus = 1.0; expect_throw(c); }
    { OptimizerConfig c = cfg; c.eta_minus = 1.0; expect_throw(c); }
    { OptimizerConfig c = cfg; c.delta_min = 0.0; expect_throw(c); }
    { OptimizerConfig c = cfg; c.delta0 = 100.0; expect_throw(c); }
    { OptimizerConfig c = cfg; c.rho = 1.0; expect_throw(c); }
    { OptimizerConfig c = cfg; c.mu_prime = -0.1; expect_throw(c); }
    { OptimizerConfig c = cfg; c.tau = 0.0; expect_throw(c); }
    { OptimizerConfig c = cfg; c.max_epochs = 0; expect_throw(c); }
    { OptimizerConfig c = cfg; c.error_target = 0.0; expect_throw(c); }
    // cooling requires q > 1 only for the cooled algorithm
    { OptimizerConfig c = cfg; c.schedule.q = 0.9; c.validate(); }
    { OptimizerConfig c = cfg; c.algorithm = Algo::esla; c.schedule.q = 0.9; expect_throw(c); }
}

TEST_CASE("algorithm names round-trip") {
    for (Algo a : {Algo::rprop, Algo::hls, Algo::esla})
        CHECK(parse_algo(to_string(a)) == a);
    CHECK_THROWS_AS(parse_algo("sgd"), std::invalid_argument);
}

TEST_CASE("decay_bias values and bound") {
    CHECK(decay_bias(std::vector<double>{0.0, 0.0}) == 0.0);
    CHECK(decay_bias(std::vector<double>{1.0}) == doctest::Approx(0.5).epsilon(1e-15));
    // each term < 1, so the sum is bounded by the dimension
    std::vector<double> w = {-5.0, 0.3, 100.0, -0.001, 2.0};
    CHECK(decay_bias(w) < 5.0);
    CHECK(decay_bias(w) > 0.0);
}

TEST_CASE("perturbed energy: identity, additivity, and decay in k") {
    const std::vector<double> w = {0.5, -1.5, 2.0};
    const double E = 0.125;
    CHECK(perturbed_energy(E, w, 0.0, 0.7) == E); // mu' = 0 passes through

    const double Q1 = noise_factor(2.0, 1, 1.6);
    const double pe = perturbed_energy(E, w, 0.01, Q1);
    CHECK(pe - E == doctest::Approx(0.5 * 0.01 * decay_bias(w) * Q1).epsilon(1e-15));

    // perturbation shrinks as the amplitude decays over epochs
    double prev = pe;
    for (long k = 2; k <= 60; ++k) {
        const double cur = perturbed_energy(E, w, 0.01, noise_factor(2.0, k, 1.6));
        CHECK(cur < prev);
        CHECK(cur > E);
        prev = cur;
    }
}

TEST_CASE("perturbed gradient: identity at mu' = 0 and exactness vs finite differences") {
    const std::vector<double> w = {0.5, -1.5, 0.0, 2.0};
    std::vector<double> g = {0.1, -0.2, 0.3, -0.4};
    const std::vector<double> g0 = g;
    perturbed_gradient(w, g, 0.0, 0.7);
    CHECK(g == g0); // bit-identical

    const double Q = noise_factor(2.0, 3, 1.6);
    perturbed_gradient(w, g, 0.01, Q);
    CHECK(g[2] == g0[2]); // a zero weight contributes no perturbation

    // check against central differences of perturbed_energy in w
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double h = 1e-6;
        std::vector<double> wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        const double fd = (perturbed_energy(0.0, wp, 0.01, Q) - perturbed_energy(0.0, wm, 0.01, Q)) /
                          (2.0 * h);
        CHECK(rel_err(g[i] - g0[i], fd) <= 1e-5);
    }
}

TEST_CASE("rprop_adapt: growth, shrink-and-mark, and hold") {
    OptimizerConfig cfg = base_config(Algo::rprop);
    OptimizerState st = OptimizerState::init(3, cfg, 1);
    CHECK(st.eta == std::vector<double>{0.1, 0.1, 0.1});

    // first epoch: prev_grad is zero, eta unchanged, prev_grad stored
    const std::vector<double> g1 = {1.0, -2.0, 0.0};
    rprop_adapt(st, g1, cfg);
    CHECK(st.eta == std::vector<double>{0.1, 0.1, 0.1});
    CHECK(st.prev_grad == g1);

    // same sign grows, opposite sign shrinks and zeroes the memory,
    // zero gradient holds
    const std::vector<double> g2 = {0.5, 3.0, 0.0};
    rprop_adapt(st, g2, cfg);
    CHECK(st.eta[0] == doctest::Approx(0.12).epsilon(1e-15));
    CHECK(st.eta[1] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(st.eta[2] == 0.1);
    CHECK(st.prev_grad[0] == 0.5);
    CHECK(st.prev_grad[1] == 0.0); // marked: no re-shrink next epoch
    CHECK(st.prev_grad[2] == 0.0);

    // the epoch after a flip never adapts that weight again
    const std::vector<double> g3 = {0.5, -1.0, 0.0};
    rprop_adapt(st, g3, cfg);
    CHECK(st.eta[1] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(st.prev_grad[1] == -1.0);
}

TEST_CASE("rprop_adapt clamps at both ends") {
    OptimizerConfig cfg = base_config(Algo::rprop);
    cfg.delta_max = 0.15;
    OptimizerState st = OptimizerState::init(1, cfg, 1);
    std::vector<double> g = {1.0};
    rprop_adapt(st, g, cfg); // store
    rprop_adapt(st, g, cfg); // 0.12
    rprop_adapt(st, g, cfg); // 0.144
    rprop_adapt(st, g, cfg); // clamped to 0.15
    CHECK(st.eta[0] == 0.15);

    cfg.delta_min = 0.04;
    st.prev_grad[0] = 1.0;
    std::vector<double> flip = {-1.0};
    rprop_adapt(st, flip, cfg); // 0.075
    st.prev_grad[0] = 1.0;
    rprop_adapt(st, flip, cfg); // would be 0.0375 -> clamped to 0.04
    CHECK(st.eta[0] == 0.04);
}

TEST_CASE("stepsize_floor lifts only stalled stepsizes, drawing one value per weight") {
    OptimizerConfig cfg = base_config(Algo::hls);
    cfg.rho = 0.5;
    OptimizerState st = OptimizerState::init(3, cfg, 99);
    st.eta = {1e-4, 1.0, 2e-3};
    const double Q = 0.1; // threshold rho Q^2 = 5e-3

    // fork the stream to predict the draws the floor will consume
    rng::Stream probe = st.noise;
    const double c0 = probe.uniform01();
    probe.uniform01(); // draw for the untouched weight is still consumed
    const double c2 = probe.uniform01();

    stepsize_floor(st, cfg, Q);
    CHECK(st.eta[0] == doctest::Approx(std::max(1e-4 * 0.5 + 2.0 * c0 * 5e-3, 1e-6)).epsilon(1e-15));
    CHECK(st.eta[1] == 1.0); // above threshold: untouched
    CHECK(st.eta[2] == doctest::Approx(std::max(2e-3 * 0.5 + 2.0 * c2 * 5e-3, 1e-6)).epsilon(1e-15));

    // the lifted value always lands in (0, 3 rho Q^2): eta < rho Q^2 before,
    // so eta_minus * eta + 2c rho Q^2 < (eta_minus + 2) rho Q^2
    CHECK(st.eta[0] > 0.0);
    CHECK(st.eta[0] < 3.0 * 5e-3);

    // rho = 0 or Q = 0 disables the floor and consumes nothing
    OptimizerState st2 = OptimizerState::init(2, cfg, 5);
    st2.eta = {1e-9, 1e-9};
    rng::Stream before = st2.noise;
    OptimizerConfig off = cfg;
    off.rho = 0.0;
    stepsize_floor(st2, off, Q);
    CHECK(st2.eta == std::vector<double>{1e-9, 1e-9});
    stepsize_floor(st2, cfg, 0.0);
    CHECK(st2.eta == std::vector<double>{1e-9, 1e-9});
    CHECK(st2.noise.uniform01() == before.uniform01());
}

TEST_CASE("stepsize_floor worked example: the formula dominates its parts") {
    // eta = 1e-4, rho = 0.5, Q = 0.1, c = 0.5
    // lifted = max(1e-4 * 0.5 + 2 * 0.5 * 0.5 * 0.01, delta_min) = 5.05e-3
    const double lifted = std::max(1e-4 * 0.5 + 2.0 * 0.5 * (0.5 * 0.1 * 0.1), 1e-6);
    CHECK(lifted == doctest::Approx(5.05e-3).epsilon(1e-15));
}

TEST_CASE("apply_update moves against the gradient sign, scaled by tau") {
    OptimizerConfig cfg = base_config(Algo::rprop);
    OptimizerState st = OptimizerState::init(3, cfg, 1);
    st.eta = {0.1, 0.2, 0.3};
    std::vector<double> w = {1.0, -2.0, 5.0};
    const std::vector<double> g = {0.3, -0.5, 0.0};
    apply_update(w, st, g, cfg);
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(-1.8).epsilon(1e-15));
    CHECK(w[2] == 5.0); // sign(0) = 0: no move

    cfg.tau = 0.5;
    apply_update(w, st, g, cfg);
    CHECK(w[0] == doctest::Approx(0.85).epsilon(1e-15));
}

TEST_CASE("train converges immediately when the start already beats the target") {
    Paraboloid obj(2, 0.0);
    OptimizerConfig cfg = base_config(Algo::rprop);
    cfg.error_target = 1e6;
    std::vector<double> w = {5.0, 5.0};
    const TrainReport rep = train_objective(w, obj, cfg, 1);
    CHECK(rep.converged);
    CHECK(rep.epochs_run == 1);
    CHECK(rep.energy_trace.size() == 1);
    CHECK(w == std::vector<double>{5.0, 5.0}); // no update applied
}

TEST_CASE("train reaches the paraboloid minimum and reports the trace") {
    for (Algo a : {Algo::rprop, Algo::hls, Algo::esla}) {
        Paraboloid obj(3, 0.0);
        OptimizerConfig cfg = base_config(a);
        cfg.error_target = 1e-6;
        cfg.max_epochs = 500;
        std::vector<double> w = {4.0, -3.0, 7.0};
        const TrainReport rep = train_objective(w, obj, cfg, 7);
        CHECK(rep.converged);
        CHECK(rep.final_energy <= 1e-6);
        CHECK(rep.epochs_run == static_cast<int>(rep.energy_trace.size()));
        CHECK(rep.energy_trace.front() == obj.value(std::vector<double>{4.0, -3.0, 7.0}));
    }
}

TEST_CASE("train flags a run whose target is unreachable") {
    Paraboloid obj(2, 1.0); // value floor 1.0, target far below
    OptimizerConfig cfg = base_config(Algo::rprop);
    cfg.error_target = 1e-8;
    cfg.max_epochs = 50;
    std::vector<double> w = {3.0, 3.0};
    const TrainReport rep = train_objective(w, obj, cfg, 1);
    CHECK(!rep.converged);
    CHECK(rep.epochs_run == 50);
    CHECK(rep.energy_trace.size() == 50);
    CHECK(rep.final_energy >= 1.0);
    CHECK(rep.diagnostic.empty());
}

TEST_CASE("train aborts with a diagnostic on non-finite values") {
    Exploder obj;
    OptimizerConfig cfg = base_config(Algo::rprop);
    cfg.error_target = 1e-12;
    cfg.max_epochs = 100;
    std::vector<double> w = {0.0};
    const TrainReport rep = train_objective(w, obj, cfg, 1);
    CHECK(!rep.converged);
    CHECK(!rep.diagnostic.empty());
    CHECK(rep.epochs_run < 100);
}

TEST_CASE("train is bit-reproducible for identical seeds and diverges across seeds") {
    const Dataset d = gen_boolean(BoolProblem::xor2);
    const Topology t({2, 2, 1}, Activation::tansig);
    OptimizerConfig cfg = base_config(Algo::esla);
    cfg.schedule.q = 2.1;
    cfg.error_target = 1e-5;
    cfg.max_epochs = 150;

    Network n1 = init_weights(t, 11);
    Network n2 = init_weights(t, 11);
    const TrainReport r1 = train(n1, d, cfg, 11);
    const TrainReport r2 = train(n2, d, cfg, 11);
    CHECK(n1.params() == n2.params());
    CHECK(r1.energy_trace == r2.energy_trace);
    CHECK(r1.epochs_run == r2.epochs_run);

    Network n3 = init_weights(t, 12);
    const TrainReport r3 = train(n3, d, cfg, 12);
    CHECK(r1.energy_trace != r3.energy_trace);
}

TEST_CASE("noise-free fixed-temperature training reduces to the plain sign method") {
    // with mu' = 0 and the floor disabled, the noisy algorithms follow the
    // exact same trajectory as the baseline, bit for bit
    const Dataset d = gen_boolean(BoolProblem::xor2);
    const Topology t({2, 2, 1}, Activation::tansig);
    for (std::uint64_t seed : {1ull, 2ull}) {
        OptimizerConfig plain = base_config(Algo::rprop);
        plain.error_target = 1e-30; // never reached: full 100 epochs
        plain.max_epochs = 100;

        OptimizerConfig quiet = plain;
        quiet.algorithm = Algo::esla;
        quiet.mu_prime = 0.0;
        quiet.rho = 0.0;

        Network a = init_weights(t, seed);
        Network b = init_weights(t, seed);
        const TrainReport ra = train(a, d, plain, seed);
        const TrainReport rb = train(b, d, quiet, seed);
        CHECK(a.params() == b.params());
        CHECK(ra.energy_trace == rb.energy_trace);
    }
}

TEST_CASE("fixed-temperature and cooled runs coincide exactly on the first epoch") {
    const Dataset d = gen_boolean(BoolProblem::parity3);
    const Topology t({3, 3, 1}, Activation::tansig);
    OptimizerConfig hls = base_config(Algo::hls);
    hls.max_epochs = 1;
    hls.error_target = 1e-30;
    OptimizerConfig esla = hls;
    esla.algorithm = Algo::esla;

    Network a = init_weights(t, 3);
    Network b = init_weights(t, 3);
    train(a, d, hls, 3);
    train(b, d, esla, 3);
    CHECK(a.params() == b.params()); // cooling starts at T0 exactly
}

TEST_CASE("stepsizes stay within their bounds through a realistic run") {
    const Dataset d = gen_boolean(BoolProblem::xor2);
    OptimizerConfig cfg = base_config(Algo::hls);
    cfg.schedule.q = 2.1;
    NetObjective obj(Topology({2, 2, 1}, Activation::tansig), d);
    OptimizerState st = OptimizerState::init(obj.dim(), cfg, 5);
    std::vector<double> w = init_weights(Topology({2, 2, 1}, Activation::tansig), 5).params();
    std::vector<double> g;
    for (int k = 1; k <= 200; ++k) {
        obj.value_and_gradient(w, g);
        const double Q = noise_factor(cfg.schedule.T0, k, cfg.schedule.q);
        perturbed_gradient(w, g, cfg.mu_prime, Q);
        rprop_adapt(st, g, cfg);
        stepsize_floor(st, cfg, Q);
        apply_update(w, st, g, cfg);
        for (double eta : st.eta) {
            CHECK(eta >= cfg.delta_min);
            CHECK(eta <= cfg.delta_max);
        }
    }
}

TEST_CASE("backtracking variant stays finite and can converge") {
    const Dataset d = gen_boolean(BoolProblem::xor2);
    const Topology t({2, 2, 1}, Activation::tansig);
    OptimizerConfig cfg = base_config(Algo::esla);
    cfg.schedule.q = 2.1;
    cfg.error_target = 1e-5;
    cfg.max_epochs = 2000;
    cfg.backtracking = true;

    int converged = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Network net = init_weights(t, seed);
        const TrainReport rep = train(net, d, cfg, seed);
        CHECK(net.finite());
        converged += rep.converged;
    }
    CHECK(converged >= 1);

    // and it genuinely changes the trajectory
    OptimizerConfig plain = cfg;
    plain.backtracking = false;
    Network a = init_weights(t, 4);
    Network b = init_weights(t, 4);
    plain.max_epochs = 60;
    plain.error_target = 1e-30;
    OptimizerConfig bt = plain;
    bt.backtracking = true;
    train(a, d, plain, 4);
    train(b, d, bt, 4);
    CHECK(a.params() != b.params());
}

TEST_CASE("weight trace records one point per epoch plus the final point") {
    Paraboloid obj(2, 1.0);
    OptimizerConfig cfg = base_config(Algo::rprop);
    cfg.error_target = 1e-9;
    cfg.max_epochs = 7;
    cfg.record_weight_trace = true;
    std::vector<double> w = {2.0, 2.0};
    const TrainReport rep = train_objective(w, obj, cfg, 1);
    CHECK(!rep.converged);
    CHECK(rep.weight_trace.size() == 8); // 7 epoch starts + final
    CHECK(rep.weight_trace.back() == w);
}
