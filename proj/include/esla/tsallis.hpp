// Generalized (q-deformed) exponential, entropy, and the two schedules built
// on them: the per-epoch noise amplitude and the power-law temperature decay.

#pragma once

#include <span>

namespace esla {

// [1 + (1-q)x]^(1/(1-q)), with the standard cutoff: 0 when the base is
// non-positive. Continuous limit exp(x) as q -> 1.
double q_exponential(double x, double q);

// S_q = K (1 - sum p_i^q) / (q - 1); Shannon form -K sum p ln p at q = 1.
// p must be a distribution (entries in [0,1], summing to 1 within 1e-12).
double tsallis_entropy(std::span<const double> p, double q, double K = 1.0);

// Noise amplitude at epoch k under temperature T: q_exponential(-T ln2 k, q).
// Equals 1 at k = 0 and decays toward 0; requires T > 0, k >= 0.
double noise_factor(double T, long k, double q);

// Temperature after k epochs of power-law cooling from T0 (requires q > 1,
// k >= 1):  T0 * (2^(q-1) - 1) / ((1+k)^(q-1) - 1).  Equals T0 at k = 1.
double cooled_temperature(double T0, double q, long k);

struct ScheduleParams {
    double q = 1.6;
    double T0 = 2.0;
    enum class Mode { fixed_temperature, cooled } mode = Mode::fixed_temperature;

    // throws std::invalid_argument on out-of-domain values
    void validate() const;

    // temperature fed to the noise amplitude at epoch k (k >= 1)
    double temperature_at(long k) const;
};

} // namespace esla
