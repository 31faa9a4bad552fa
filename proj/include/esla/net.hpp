// Fully connected feedforward networks on a flat parameter vector, plus the
// batch error/gradient routines the optimizers drive.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace esla {

enum class Activation { logistic, tansig, linear };

Activation parse_activation(const std::string& name); // throws on unknown name
const char* to_string(Activation a);

double activate(Activation a, double x);
// derivative expressed through the unit's output y = activate(x)
double activate_deriv(Activation a, double y);
// decision threshold for single-output classification (midpoint of the range)
double activation_midpoint(Activation a);

struct Topology {
    std::vector<int> layers;              // unit counts, input first
    std::vector<Activation> activations;  // one per non-input layer

    Topology() = default;
    Topology(std::vector<int> layer_sizes, Activation uniform);
    Topology(std::vector<int> layer_sizes, std::vector<Activation> acts);

    int n_layers() const { return static_cast<int>(layers.size()); }
    int n_inputs() const { return layers.front(); }
    int n_outputs() const { return layers.back(); }
    std::size_t n_params() const;
    void validate() const; // throws std::invalid_argument

    bool operator==(const Topology&) const = default;
};

// "8-2-2-2" -> Topology with the given activation at every non-input layer
Topology parse_topology(const std::string& text, Activation act);
std::string format_topology(const Topology& t);

struct Pattern {
    std::vector<double> input;
    std::vector<double> target;
};

struct Dataset {
    std::vector<Pattern> patterns;
    std::vector<int> labels; // class ids; empty when not a classification set

    std::size_t size() const { return patterns.size(); }
    bool empty() const { return patterns.empty(); }
    int n_inputs() const;
    int n_outputs() const;
    void validate() const; // uniform dimensions, labels either empty or full
};

class Network {
  public:
    Network() = default;
    explicit Network(Topology topo); // zero-initialized parameters

    const Topology& topology() const { return topo_; }
    std::size_t n_params() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    // layout per connection block l: weights [fan_in][fan_out] row-major,
    // then the fan_out biases
    std::size_t weight_index(int l, int from, int to) const;
    std::size_t bias_index(int l, int to) const;
    double weight(int l, int from, int to) const { return params_[weight_index(l, from, to)]; }
    double& weight(int l, int from, int to) { return params_[weight_index(l, from, to)]; }
    double bias(int l, int to) const { return params_[bias_index(l, to)]; }
    double& bias(int l, int to) { return params_[bias_index(l, to)]; }

    bool finite() const; // all parameters finite

  private:
    Topology topo_;
    std::vector<std::size_t> w_off_, b_off_;
    std::vector<double> params_;
};

// Independent uniform draws on (-range, range); identical (seed, topology,
// range) gives a bit-identical network.
Network init_weights(const Topology& topo, std::uint64_t seed, double range = 0.5);

// activations of every layer (element 0 is the input itself)
std::vector<std::vector<double>> forward(const Network& net, std::span<const double> input);

// Mean squared error over all patterns and output units:
//   E = (1 / (P * n_out)) * sum_p sum_j (y_pj - t_pj)^2
double energy(const Network& net, const Dataset& data);
std::vector<double> gradient(const Network& net, const Dataset& data);
// single backward pass producing both; grad is resized to n_params
double energy_and_gradient(const Network& net, const Dataset& data, std::vector<double>& grad);

// Percentage of patterns classified correctly. Multi-output: argmax of
// outputs vs argmax of targets (first index wins ties). Single output:
// threshold at the activation midpoint.
double classify(const Network& net, const Dataset& data);

// Text round-trip: topology line, activation line, then one parameter per
// line with %.17g (bit-exact reload).
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

} // namespace esla
