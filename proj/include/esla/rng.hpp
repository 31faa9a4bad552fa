// Counter-based deterministic random numbers (splitmix64 finalizer).
// Every draw is a pure function of (seed, counter), so identical seeds give
// bit-identical streams on any platform, independent of call interleaving.

#pragma once

#include <cstdint>

namespace esla::rng {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// n-th value of the stream identified by seed
constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t n) {
    return mix64(seed + (n + 1) * kGamma);
}

// uniform on the open interval (0,1); 53-bit resolution
inline double uniform01(std::uint64_t seed, std::uint64_t n) {
    return (static_cast<double>(at(seed, n) >> 11) + 0.5) * 0x1.0p-53;
}

// Sequential view over the counter-based generator. Copyable value type;
// copying forks the stream at its current position.
class Stream {
  public:
    explicit Stream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return at(seed_, n_++); }

    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Fisher-Yates index for shuffles: uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  private:
    std::uint64_t seed_;
    std::uint64_t n_ = 0;
};

} // namespace esla::rng
