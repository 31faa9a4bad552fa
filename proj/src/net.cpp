#include "esla/net.hpp"

#include "esla/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace esla {

Activation parse_activation(const std::string& name) {
    if (name == "logistic") return Activation::logistic;
    if (name == "tansig") return Activation::tansig;
    if (name == "linear") return Activation::linear;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

const char* to_string(Activation a) {
    switch (a) {
    case Activation::logistic: return "logistic";
    case Activation::tansig: return "tansig";
    case Activation::linear: return "linear";
    }
    return "?";
}

double activate(Activation a, double x) {
    switch (a) {
    case Activation::logistic: return 1.0 / (1.0 + std::exp(-x));
    case Activation::tansig: return std::tanh(x);
    case Activation::linear: return x;
    }
    return x;
}

double activate_deriv(Activation a, double y) {
    switch (a) {
    case Activation::logistic: return y * (1.0 - y);
    case Activation::tansig: return 1.0 - y * y;
    case Activation::linear: return 1.0;
    }
    return 1.0;
}

double activation_midpoint(Activation a) {
    return a == Activation::tansig ? 0.0 : 0.5;
}

Topology::Topology(std::vector<int> layer_sizes, Activation uniform)
    : layers(std::move(layer_sizes)) {
    if (layers.size() >= 2)
        activations.assign(layers.size() - 1, uniform);
    validate();
}

Topology::Topology(std::vector<int> layer_sizes, std::vector<Activation> acts)
    : layers(std::move(layer_sizes)), activations(std::move(acts)) {
    validate();
}

void Topology::validate() const {
    if (layers.size() < 2)
        throw std::invalid_argument("topology needs at least input and output layers");
    for (int n : layers)
        if (n < 1)
            throw std::invalid_argument("topology layer sizes must be positive");
    if (activations.size() != layers.size() - 1)
        throw std::invalid_argument("topology needs one activation per non-input layer");
}

std::size_t Topology::n_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l)
        n += static_cast<std::size_t>(layers[l]) * layers[l + 1] + layers[l + 1];
    return n;
}

Topology parse_topology(const std::string& text, Activation act) {
    std::vector<int> sizes;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t dash = text.find('-', pos);
        if (dash == std::string::npos) dash = text.size();
        const std::string tok = text.substr(pos, dash - pos);
        try {
            std::size_t used = 0;
            int v = std::stoi(tok, &used);
            if (used != tok.size() || tok.empty())
                throw std::invalid_argument(tok);
            sizes.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad topology '" + text + "': expected sizes like 2-2-1");
        }
        pos = dash + 1;
        if (dash == text.size()) break;
    }
    return Topology(std::move(sizes), act);
}

std::string format_topology(const Topology& t) {
    std::string s;
    for (std::size_t i = 0; i < t.layers.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(t.layers[i]);
    }
    return s;
}

int Dataset::n_inputs() const {
    if (empty())
        throw std::invalid_argument("dataset is empty");
    return static_cast<int>(patterns.front().input.size());
}

int Dataset::n_outputs() const {
    if (empty())
        throw std::invalid_argument("dataset is empty");
    return static_cast<int>(patterns.front().target.size());
}

void Dataset::validate() const {
    if (empty())
        throw std::invalid_argument("dataset is empty");
    const std::size_t ni = patterns.front().input.size();
    const std::size_t no = patterns.front().target.size();
    if (ni == 0 || no == 0)
        throw std::invalid_argument("dataset patterns must have inputs and targets");
    for (const Pattern& p : patterns)
        if (p.input.size() != ni || p.target.size() != no)
            throw std::invalid_argument("dataset patterns have inconsistent dimensions");
    if (!labels.empty() && labels.size() != patterns.size())
        throw std::invalid_argument("dataset labels must be empty or one per pattern");
}

Network::Network(Topology topo) : topo_(std::move(topo)) {
    topo_.validate();
    const int L = topo_.n_layers();
    w_off_.resize(L - 1);
    b_off_.resize(L - 1);
    std::size_t off = 0;
    for (int l = 0; l + 1 < L; ++l) {
        w_off_[l] = off;
        off += static_cast<std::size_t>(topo_.layers[l]) * topo_.layers[l + 1];
        b_off_[l] = off;
        off += topo_.layers[l + 1];
    }
    params_.assign(off, 0.0);
}

std::size_t Network::weight_index(int l, int from, int to) const {
    return w_off_[l] + static_cast<std::size_t>(from) * topo_.layers[l + 1] + to;
}

std::size_t Network::bias_index(int l, int to) const {
    return b_off_[l] + to;
}

bool Network::finite() const {
    for (double v : params_)
        if (!std::isfinite(v))
            return false;
    return true;
}

Network init_weights(const Topology& topo, std::uint64_t seed, double range) {
    if (range < 0.0)
        throw std::invalid_argument("init_weights: range must be non-negative");
    Network net(topo);
    std::vector<double>& w = net.params();
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = range * (2.0 * rng::uniform01(seed, i) - 1.0);
    return net;
}

std::vector<std::vector<double>> forward(const Network& net, std::span<const double> input) {
    const Topology& t = net.topology();
    if (static_cast<int>(input.size()) != t.n_inputs())
        throw std::invalid_argument("forward: input size does not match topology");
    std::vector<std::vector<double>> act(t.n_layers());
    act[0].assign(input.begin(), input.end());
    for (int l = 0; l + 1 < t.n_layers(); ++l) {
        const int nin = t.layers[l], nout = t.layers[l + 1];
        act[l + 1].resize(nout);
        for (int j = 0; j < nout; ++j) {
            double s = net.bias(l, j);
            for (int i = 0; i < nin; ++i)
                s += act[l][i] * net.weight(l, i, j);
            act[l + 1][j] = activate(t.activations[l], s);
        }
    }
    return act;
}

namespace {

// Shared backprop core. grad may be null (energy only).
double batch_error(const Network& net, const Dataset& data, std::vector<double>* grad) {
    data.validate();
    const Topology& t = net.topology();
    if (data.n_inputs() != t.n_inputs() || data.n_outputs() != t.n_outputs())
        throw std::invalid_argument("dataset dimensions do not match network topology");

    const int L = t.n_layers();
    if (grad)
        grad->assign(net.n_params(), 0.0);

    // reusable activation / delta buffers
    std::vector<std::vector<double>> act(L), delta(L);
    for (int l = 0; l < L; ++l) {
        act[l].resize(t.layers[l]);
        delta[l].resize(t.layers[l]);
    }

    const double norm = 1.0 / (static_cast<double>(data.size()) * t.n_outputs());
    double err = 0.0;

    for (const Pattern& p : data.patterns) {
        act[0] = p.input;
        for (int l = 0; l + 1 < L; ++l) {
            const int nin = t.layers[l], nout = t.layers[l + 1];
            for (int j = 0; j < nout; ++j) {
                double s = net.bias(l, j);
                for (int i = 0; i < nin; ++i)
                    s += act[l][i] * net.weight(l, i, j);
                act[l + 1][j] = activate(t.activations[l], s);
            }
        }
        for (int j = 0; j < t.n_outputs(); ++j) {
            const double d = act[L - 1][j] - p.target[j];
            err += d * d;
        }
        if (!grad)
            continue;
        // output deltas: d err / d net_j, with err already including norm
        for (int j = 0; j < t.n_outputs(); ++j) {
            const double y = act[L - 1][j];
            delta[L - 1][j] = 2.0 * norm * (y - p.target[j]) * activate_deriv(t.activations[L - 2], y);
        }
        for (int l = L - 2; l >= 1; --l) {
            const int nout = t.layers[l + 1];
            for (int i = 0; i < t.layers[l]; ++i) {
                double s = 0.0;
                for (int j = 0; j < nout; ++j)
                    s += net.weight(l, i, j) * delta[l + 1][j];
                delta[l][i] = s * activate_deriv(t.activations[l - 1], act[l][i]);
            }
        }
        for (int l = 0; l + 1 < L; ++l) {
            const int nin = t.layers[l], nout = t.layers[l + 1];
            for (int j = 0; j < nout; ++j) {
                const double dj = delta[l + 1][j];
                (*grad)[net.bias_index(l, j)] += dj;
                for (int i = 0; i < nin; ++i)
                    (*grad)[net.weight_index(l, i, j)] += act[l][i] * dj;
            }
        }
    }
    return err * norm;
}

} // namespace

double energy(const Network& net, const Dataset& data) {
    return batch_error(net, data, nullptr);
}

std::vector<double> gradient(const Network& net, const Dataset& data) {
    std::vector<double> g;
    batch_error(net, data, &g);
    return g;
}

double energy_and_gradient(const Network& net, const Dataset& data, std::vector<double>& grad) {
    return batch_error(net, data, &grad);
}

double classify(const Network& net, const Dataset& data) {
    data.validate();
    const Topology& t = net.topology();
    const int no = t.n_outputs();
    std::size_t correct = 0;
    for (const Pattern& p : data.patterns) {
        const std::vector<std::vector<double>> act = forward(net, p.input);
        const std::vector<double>& out = act.back();
        bool ok;
        if (no == 1) {
            const double mid = activation_midpoint(t.activations.back());
            ok = (out[0] > mid) == (p.target[0] > mid);
        } else {
            int ybest = 0, tbest = 0;
            for (int j = 1; j < no; ++j) {
                if (out[j] > out[ybest]) ybest = j;
                if (p.target[j] > p.target[tbest]) tbest = j;
            }
            ok = ybest == tbest;
        }
        correct += ok;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << format_topology(net.topology()) << '\n';
    const Topology& t = net.topology();
    for (std::size_t i = 0; i < t.activations.size(); ++i)
        out << (i ? " " : "") << to_string(t.activations[i]);
    out << '\n';
    char buf[40];
    for (double v : net.params()) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << '\n';
    }
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    std::string topo_line, act_line;
    if (!std::getline(in, topo_line) || !std::getline(in, act_line))
        throw std::runtime_error("'" + path + "': truncated network file");
    Topology shape = parse_topology(topo_line, Activation::logistic);
    std::istringstream acts(act_line);
    std::vector<Activation> a;
    std::string name;
    while (acts >> name)
        a.push_back(parse_activation(name));
    Network net(Topology(shape.layers, std::move(a)));
    for (double& v : net.params())
        if (!(in >> v))
            throw std::runtime_error("'" + path + "': too few parameters");
    double extra;
    if (in >> extra)
        throw std::runtime_error("'" + path + "': trailing data");
    return net;
}

} // namespace esla
