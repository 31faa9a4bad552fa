// Sign-based batch training (individual adaptive stepsizes), optionally on a
// noise-perturbed error surface whose amplitude follows the generalized
// exponential schedule — at fixed temperature or with power-law cooling.

#pragma once

#include "esla/net.hpp"
#include "esla/rng.hpp"
#include "esla/tsallis.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace esla {

enum class Algo { rprop, hls, esla };

Algo parse_algo(const std::string& name); // throws on unknown name
const char* to_string(Algo a);

struct OptimizerConfig {
    Algo algorithm = Algo::rprop;

    // stepsize adaptation
    double eta_plus = 1.2;
    double eta_minus = 0.5;
    double delta0 = 0.1;
    double delta_min = 1e-6;
    double delta_max = 50.0;
    double tau = 1.0; // global scale on every applied step

    // perturbation strength (weight-decay-shaped noise term)
    double mu_prime = 0.01;
    // stepsize floor coupling; 0 disables the floor entirely
    double rho = 0.5;

    ScheduleParams schedule; // q and T0; mode is derived from the algorithm

    int max_epochs = 2000;
    double error_target = 1e-3;

    bool backtracking = false;        // revert a step on gradient sign flip
    bool record_weight_trace = false; // keep per-epoch weights in the report

    bool noisy() const { return algorithm != Algo::rprop; }
    void validate() const; // throws std::invalid_argument
};

struct OptimizerState {
    std::vector<double> eta;       // per-weight stepsizes
    std::vector<double> prev_grad; // previous (perturbed) gradient
    std::vector<double> prev_step; // last applied step (backtracking only)
    rng::Stream noise{0};          // per-trial stream for the floor draws

    static OptimizerState init(std::size_t n, const OptimizerConfig& cfg, std::uint64_t seed);
};

struct TrainReport {
    int epochs_run = 0;
    bool converged = false;
    double final_energy = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> energy_trace;               // energy at each epoch start
    std::vector<std::vector<double>> weight_trace;  // when requested: weights at each epoch start, then final
    std::string diagnostic;                         // non-empty if the run aborted (non-finite values)
};

// Anything the engine can minimize: a dimension, a value, and a gradient.
class Objective {
  public:
    virtual ~Objective() = default;
    virtual std::size_t dim() const = 0;
    virtual double value(std::span<const double> w) const = 0;
    // returns the value; g is resized to dim()
    virtual double value_and_gradient(std::span<const double> w, std::vector<double>& g) const = 0;
};

// Batch network error on a dataset as an Objective.
class NetObjective final : public Objective {
  public:
    NetObjective(Topology topo, const Dataset& data);
    std::size_t dim() const override { return scratch_.n_params(); }
    double value(std::span<const double> w) const override;
    double value_and_gradient(std::span<const double> w, std::vector<double>& g) const override;

  private:
    mutable Network scratch_;
    const Dataset& data_;
};

// --- individual steps of one training epoch (exposed for direct testing) ---

// sum_i w_i^2 / (1 + w_i^2): the bounded decay term driving the perturbation
double decay_bias(std::span<const double> w);

// E~ = E + (mu'/2) * decay_bias(w) * Q   (Q = noise amplitude this epoch)
double perturbed_energy(double plain_energy, std::span<const double> w, double mu_prime, double Q);

// g~_i = g_i + mu' * w_i / (1 + w_i^2)^2 * Q; exact gradient of the above.
// mu' = 0 returns the plain gradient unchanged (bit-identical).
void perturbed_gradient(std::span<const double> w, std::vector<double>& g, double mu_prime, double Q);

// Sign-agreement stepsize adaptation: grows eta by eta_plus while the
// gradient keeps its sign, shrinks by eta_minus on a flip (and marks the
// flip by zeroing prev_grad), leaves eta alone when either factor is zero.
void rprop_adapt(OptimizerState& st, std::span<const double> grad, const OptimizerConfig& cfg);

// Noise-floor rule: any eta below rho*Q^2 is lifted to
// max(eta*eta_minus + 2*c*rho*Q^2, delta_min) with c ~ U(0,1) drawn fresh
// per weight from the trial stream. Keeps steps from freezing while the
// perturbation is still strong. No-op when rho = 0 or Q = 0.
void stepsize_floor(OptimizerState& st, const OptimizerConfig& cfg, double Q);

// w_i -= tau * eta_i * sign(g~_i), with sign(0) = 0
void apply_update(std::span<double> w, const OptimizerState& st, std::span<const double> grad,
                  const OptimizerConfig& cfg);

// --- the engine ---

// Minimizes obj from the given starting point; w is updated in place.
// The seed feeds only the floor draws (derived stream, decorrelated from
// weight initialization). Convergence is checked on the unperturbed value
// at the start of each epoch, before any update.
TrainReport train_objective(std::vector<double>& w, const Objective& obj,
                            const OptimizerConfig& cfg, std::uint64_t seed);

// Convenience wrapper over NetObjective: trains net in place.
TrainReport train(Network& net, const Dataset& data, const OptimizerConfig& cfg, std::uint64_t seed);

} // namespace esla
