#pragma once

// Seeded randomness. Every stochastic routine takes an explicit seed; parallel
// Monte Carlo splits work into chunks whose streams are derived from
// (seed, chunk index), so results do not depend on the thread count.

#include <cmath>
#include <cstdint>
#include <random>

namespace dsim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the `index`-th derived stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t bits() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() {
        double u;
        do { u = uniform(); } while (u == 0.0);
        return u;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    int bit() { return static_cast<int>(engine_() >> 63); }

    double normal() { return normal_(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dsim
