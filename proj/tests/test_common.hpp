#pragma once

#include <catch_amalgamated.hpp>

#include "dsim/dsim.hpp"

using Catch::Approx;
using namespace dsim;

inline Region unit_disk() { return Region::ellipsoid({{1.0, 0.0}, {0.0, 1.0}}); }

/// Independent hit-or-miss estimate of V(A ∩ b) with its 3σ radius.
inline std::pair<double, double> mc_clipped_volume(const Region& a, const Box& b, std::uint64_t samples, std::uint64_t seed) {
    Rng rng(seed);
    std::uint64_t hits = 0;
    Vec x(b.dim());
    for (std::uint64_t s = 0; s < samples; ++s) {
        for (std::size_t i = 0; i < b.dim(); ++i) x[i] = rng.uniform(b.lo[i], b.hi[i]);
        hits += a.contains(x);
    }
    const double p = static_cast<double>(hits) / static_cast<double>(samples);
    return {p * b.volume(), 3 * b.volume() * std::sqrt(p * (1 - p) / static_cast<double>(samples))};
}
