#include "esla/tsallis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace esla {

namespace {
// Below this distance from 1, q is treated as exactly 1 (ordinary limit).
constexpr double kQLimitEps = 1e-9;
} // namespace

double q_exponential(double x, double q) {
    if (!std::isfinite(x) || !std::isfinite(q))
        throw std::invalid_argument("q_exponential: non-finite argument");
    const double one_minus_q = 1.0 - q;
    if (std::abs(one_minus_q) < kQLimitEps)
        return std::exp(x);
    const double u = one_minus_q * x;
    if (1.0 + u <= 0.0)
        return 0.0; // cutoff branch: the deformed exponential vanishes here
    // (1+u)^(1/(1-q)) via log1p keeps full precision when u is tiny
    return std::exp(std::log1p(u) / one_minus_q);
}

double tsallis_entropy(std::span<const double> p, double q, double K) {
    if (p.empty())
        throw std::invalid_argument("tsallis_entropy: empty distribution");
    if (!(K > 0.0))
        throw std::invalid_argument("tsallis_entropy: K must be positive");
    double total = 0.0;
    for (double pi : p) {
        if (!(pi >= 0.0 && pi <= 1.0))
            throw std::invalid_argument("tsallis_entropy: probabilities must lie in [0,1]");
        total += pi;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("tsallis_entropy: probabilities must sum to 1");

    if (std::abs(q - 1.0) < kQLimitEps) {
        double s = 0.0;
        for (double pi : p)
            if (pi > 0.0)
                s -= pi * std::log(pi);
        return K * s;
    }
    double sum_pq = 0.0;
    for (double pi : p)
        if (pi > 0.0) // zero-probability states carry no weight for any q
            sum_pq += std::pow(pi, q);
    return K * (1.0 - sum_pq) / (q - 1.0);
}

double noise_factor(double T, long k, double q) {
    if (!(T > 0.0))
        throw std::invalid_argument("noise_factor: temperature must be positive");
    if (k < 0)
        throw std::invalid_argument("noise_factor: epoch index must be non-negative");
    return q_exponential(-T * std::numbers::ln2 * static_cast<double>(k), q);
}

double cooled_temperature(double T0, double q, long k) {
    if (!(T0 > 0.0))
        throw std::invalid_argument("cooled_temperature: T0 must be positive");
    if (!(q > 1.0))
        throw std::invalid_argument("cooled_temperature: cooling requires q > 1");
    if (k < 1)
        throw std::invalid_argument("cooled_temperature: epoch index must be >= 1");
    const double num = std::pow(2.0, q - 1.0) - 1.0;
    const double den = std::pow(1.0 + static_cast<double>(k), q - 1.0) - 1.0;
    return T0 * num / den;
}

void ScheduleParams::validate() const {
    if (!(T0 > 0.0))
        throw std::invalid_argument("ScheduleParams: T0 must be positive");
    if (mode == Mode::cooled && !(q > 1.0))
        throw std::invalid_argument("ScheduleParams: cooled schedule requires q > 1");
    if (!std::isfinite(q))
        throw std::invalid_argument("ScheduleParams: q must be finite");
}

double ScheduleParams::temperature_at(long k) const {
    if (mode == Mode::cooled)
        return cooled_temperature(T0, q, k);
    return T0;
}

} // namespace esla
