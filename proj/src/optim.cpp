#include "esla/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace esla {

namespace {

inline double sgn(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x))
            return false;
    return true;
}

// constant offset decorrelating the floor-draw stream from weight init,
// which uses the raw seed
constexpr std::uint64_t kNoiseStreamSalt = 0x6E6F697365ull;

} // namespace

Algo parse_algo(const std::string& name) {
    if (name == "rprop") return Algo::rprop;
    if (name == "hls") return Algo::hls;
    if (name == "esla") return Algo::esla;
    throw std::invalid_argument("unknown algorithm '" + name + "'");
}

const char* to_string(Algo a) {
    switch (a) {
    case Algo::rprop: return "rprop";
    case Algo::hls: return "hls";
    case Algo::esla: return "esla";
    }
    return "?";
}

void OptimizerConfig::validate() const {
    if (!(eta_plus > 1.0))
        throw std::invalid_argument("optimizer: eta_plus must exceed 1");
    if (!(eta_minus > 0.0 && eta_minus < 1.0))
        throw std::invalid_argument("optimizer: eta_minus must lie in (0,1)");
    if (!(delta_min > 0.0 && delta_min <= delta0 && delta0 <= delta_max))
        throw std::invalid_argument("optimizer: need 0 < delta_min <= delta0 <= delta_max");
    if (!(tau > 0.0))
        throw std::invalid_argument("optimizer: tau must be positive");
    if (!(mu_prime >= 0.0))
        throw std::invalid_argument("optimizer: mu_prime must be non-negative");
    if (!(rho >= 0.0 && rho < 1.0))
        throw std::invalid_argument("optimizer: rho must lie in [0,1)");
    if (max_epochs < 1)
        throw std::invalid_argument("optimizer: max_epochs must be at least 1");
    if (!(error_target > 0.0) || !std::isfinite(error_target))
        throw std::invalid_argument("optimizer: error_target must be positive and finite");
    ScheduleParams sched = schedule;
    sched.mode = algorithm == Algo::esla ? ScheduleParams::Mode::cooled
                                         : ScheduleParams::Mode::fixed_temperature;
    sched.validate();
}

OptimizerState OptimizerState::init(std::size_t n, const OptimizerConfig& cfg, std::uint64_t seed) {
    OptimizerState st;
    st.eta.assign(n, cfg.delta0);
    st.prev_grad.assign(n, 0.0);
    if (cfg.backtracking)
        st.prev_step.assign(n, 0.0);
    st.noise = rng::Stream(rng::mix64(seed ^ kNoiseStreamSalt));
    return st;
}

NetObjective::NetObjective(Topology topo, const Dataset& data)
    : scratch_(std::move(topo)), data_(data) {
    data_.validate();
}

double NetObjective::value(std::span<const double> w) const {
    if (w.size() != scratch_.n_params())
        throw std::invalid_argument("objective: wrong parameter count");
    scratch_.params().assign(w.begin(), w.end());
    return energy(scratch_, data_);
}

double NetObjective::value_and_gradient(std::span<const double> w, std::vector<double>& g) const {
    if (w.size() != scratch_.n_params())
        throw std::invalid_argument("objective: wrong parameter count");
    scratch_.params().assign(w.begin(), w.end());
    return energy_and_gradient(scratch_, data_, g);
}

double decay_bias(std::span<const double> w) {
    double s = 0.0;
    for (double wi : w) {
        const double w2 = wi * wi;
        s += w2 / (1.0 + w2);
    }
    return s;
}

double perturbed_energy(double plain_energy, std::span<const double> w, double mu_prime, double Q) {
    if (mu_prime == 0.0)
        return plain_energy;
    return plain_energy + 0.5 * mu_prime * decay_bias(w) * Q;
}

void perturbed_gradient(std::span<const double> w, std::vector<double>& g, double mu_prime, double Q) {
    if (g.size() != w.size())
        throw std::invalid_argument("perturbed_gradient: size mismatch");
    if (mu_prime == 0.0)
        return; // plain gradient passes through untouched
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = 1.0 + w[i] * w[i];
        g[i] += mu_prime * w[i] / (d * d) * Q;
    }
}

void rprop_adapt(OptimizerState& st, std::span<const double> grad, const OptimizerConfig& cfg) {
    const std::size_t n = grad.size();
    if (st.eta.size() != n || st.prev_grad.size() != n)
        throw std::invalid_argument("rprop_adapt: state size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const double prod = st.prev_grad[i] * grad[i];
        if (prod > 0.0) {
            st.eta[i] = std::min(st.eta[i] * cfg.eta_plus, cfg.delta_max);
            st.prev_grad[i] = grad[i];
        } else if (prod < 0.0) {
            st.eta[i] = std::max(st.eta[i] * cfg.eta_minus, cfg.delta_min);
            st.prev_grad[i] = 0.0; // suppress re-adaptation right after a flip
        } else {
            st.prev_grad[i] = grad[i];
        }
    }
}

void stepsize_floor(OptimizerState& st, const OptimizerConfig& cfg, double Q) {
    if (cfg.rho == 0.0 || Q == 0.0)
        return;
    const double threshold = cfg.rho * Q * Q;
    for (double& eta : st.eta) {
        // one draw per weight per epoch, taken unconditionally so the stream
        // position never depends on the data
        const double c = st.noise.uniform01();
        if (eta < threshold)
            eta = std::max(eta * cfg.eta_minus + 2.0 * c * threshold, cfg.delta_min);
    }
}

void apply_update(std::span<double> w, const OptimizerState& st, std::span<const double> grad,
                  const OptimizerConfig& cfg) {
    if (w.size() != grad.size() || st.eta.size() != w.size())
        throw std::invalid_argument("apply_update: size mismatch");
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] -= cfg.tau * st.eta[i] * sgn(grad[i]);
}

namespace {

// One epoch of the backtracking variant: same eta adaptation, but a sign
// flip also undoes the previous step for that weight instead of moving.
void backtrack_epoch(std::span<double> w, OptimizerState& st, std::span<const double> grad,
                     const OptimizerConfig& cfg, double Q, bool noisy) {
    const std::size_t n = w.size();
    std::vector<signed char> flipped(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double prod = st.prev_grad[i] * grad[i];
        if (prod > 0.0) {
            st.eta[i] = std::min(st.eta[i] * cfg.eta_plus, cfg.delta_max);
        } else if (prod < 0.0) {
            st.eta[i] = std::max(st.eta[i] * cfg.eta_minus, cfg.delta_min);
            flipped[i] = 1;
        }
    }
    if (noisy)
        stepsize_floor(st, cfg, Q);
    for (std::size_t i = 0; i < n; ++i) {
        if (flipped[i]) {
            w[i] -= st.prev_step[i];
            st.prev_step[i] = 0.0;
            st.prev_grad[i] = 0.0;
        } else {
            const double step = -cfg.tau * st.eta[i] * sgn(grad[i]);
            w[i] += step;
            st.prev_step[i] = step;
            st.prev_grad[i] = grad[i];
        }
    }
}

} // namespace

TrainReport train_objective(std::vector<double>& w, const Objective& obj,
                            const OptimizerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (w.size() != obj.dim())
        throw std::invalid_argument("train: starting point has wrong dimension");

    OptimizerState st = OptimizerState::init(w.size(), cfg, seed);
    TrainReport rep;
    rep.energy_trace.reserve(static_cast<std::size_t>(cfg.max_epochs));

    std::vector<double> g;
    for (int k = 1; k <= cfg.max_epochs; ++k) {
        const double E = obj.value_and_gradient(w, g);
        rep.energy_trace.push_back(E);
        if (cfg.record_weight_trace)
            rep.weight_trace.push_back(w);

        if (!std::isfinite(E) || !all_finite(g)) {
            rep.epochs_run = k;
            rep.final_energy = E;
            rep.diagnostic = "aborted at epoch " + std::to_string(k) +
                             ": non-finite energy or gradient";
            return rep;
        }
        if (E <= cfg.error_target) {
            rep.epochs_run = k;
            rep.converged = true;
            rep.final_energy = E;
            return rep;
        }

        double Q = 0.0;
        if (cfg.noisy()) {
            const double T = cfg.algorithm == Algo::esla
                                 ? cooled_temperature(cfg.schedule.T0, cfg.schedule.q, k)
                                 : cfg.schedule.T0;
            Q = noise_factor(T, k, cfg.schedule.q);
            perturbed_gradient(w, g, cfg.mu_prime, Q);
        }

        if (cfg.backtracking) {
            backtrack_epoch(w, st, g, cfg, Q, cfg.noisy());
        } else {
            rprop_adapt(st, g, cfg);
            if (cfg.noisy())
                stepsize_floor(st, cfg, Q);
            apply_update(w, st, g, cfg);
        }
    }

    rep.epochs_run = cfg.max_epochs;
    rep.final_energy = obj.value(w);
    if (cfg.record_weight_trace)
        rep.weight_trace.push_back(w);
    return rep;
}

TrainReport train(Network& net, const Dataset& data, const OptimizerConfig& cfg, std::uint64_t seed) {
    NetObjective obj(net.topology(), data);
    return train_objective(net.params(), obj, cfg, seed);
}

} // namespace esla
