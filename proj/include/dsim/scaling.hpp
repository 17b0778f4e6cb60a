#pragma once

// Bound evaluation for the dyadic decomposition entropy: the projection bound
// (orthogonally convex sets), the scaled truncated-entropy bound with its
// diagonal scaling construction, the log-concave bound, and the random
// shift/scale wrapper whose average decomposition entropy equals the erosion
// entropy expression.

#include "dsim/dyadic.hpp"
#include "dsim/entropy.hpp"

#include "json.hpp"

namespace dsim {

struct BoundPair {
    double h_bound = 0.0;  // bound on H(W)
    double g_bound = 0.0;  // bound on the common entropy G after randomization
};

/// n log(sum_i VP_{\i}) - (n-1) log V + (2 + log e) n; the G form ends in n log e.
inline BoundPair bound_thm1(const Region& a, std::uint64_t seed = 1) {
    const std::size_t n = a.dim();
    double sum_vp = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum_vp += projection_volume(a, i, seed).value;
    const double dn = static_cast<double>(n);
    const double core = dn * std::log2(sum_vp) - (dn - 1) * std::log2(a.volume());
    return {core + (2 + kLog2E) * dn, core + dn * kLog2E};
}

struct Thm2Report {
    std::vector<double> trunc_entropy;  // h̃_{1/n}(X_{\i})
    std::vector<double> log_vp;         // log VP_{\i}, the ζ -> 0 relaxation
    BoundPair truncated;                // with h̃_{1/n}
    BoundPair projection;               // with h̃ replaced by log VP
};

inline double thm2_constant(std::size_t n) {
    const double dn = static_cast<double>(n);
    return dn * std::log2(dn) + (2 + kLog2E) * dn;
}

inline Thm2Report bound_thm2(const Region& a, std::uint64_t seed = 1) {
    const std::size_t n = a.dim();
    require(n >= 2, "the scaled bound needs n >= 2");
    const double dn = static_cast<double>(n);
    Thm2Report r;
    double st = 0.0, sp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r.trunc_entropy.push_back(truncated_marginal_entropy(a, i, 1.0 / dn).h.value);
        r.log_vp.push_back(std::log2(projection_volume(a, i, seed).value));
        st += r.trunc_entropy.back();
        sp += r.log_vp.back();
    }
    const double lv = (dn - 1) * std::log2(a.volume());
    const double g_tail = dn * std::log2(dn) + dn * kLog2E;
    r.truncated = {st - lv + thm2_constant(n), st - lv + g_tail};
    r.projection = {sp - lv + thm2_constant(n), sp - lv + g_tail};
    return r;
}

/// The ellipse closed form of the projection relaxation:
/// log(π⁻¹ sqrt(K11 K22 / det K)) + 8 + 2 log e.
inline double thm2_ellipse_closed_form(double k11, double k12, double k22) {
    const double det = k11 * k22 - k12 * k12;
    return std::log2(std::sqrt(k11 * k22 / det) / kPi) + 8 + 2 * kLog2E;
}

/// I_D + n² log e + n(log n + log(n+1) + e + 2 log e + 2) + 2 + log e, and the
/// G form I_D + n² log e + 9 n log n.
inline BoundPair bound_thm3(std::size_t n, double i_d) {
    const double dn = static_cast<double>(n);
    const double h = i_d + dn * dn * kLog2E +
                     dn * (std::log2(dn) + std::log2(dn + 1) + kE + 2 * kLog2E + 2) + 2 + kLog2E;
    const double g = i_d + dn * dn * kLog2E + 9 * dn * std::log2(dn);
    return {h, g};
}

/// Diagonal scaling of the scaled bound: α_i solves ∫ min{f_{X_{\i}}, α_i} = 1/n,
/// ξ = (∏ α_j)^{1/n} and d_i = ξ / α_i.
struct ScalingMatrix {
    Vec d;
    Vec alpha;
    double xi = 0.0;
};

inline ScalingMatrix find_scaling(const Region& a) {
    const std::size_t n = a.dim();
    require(n >= 2, "scaling needs n >= 2");
    ScalingMatrix s;
    double log_prod = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double alpha = truncated_marginal_entropy(a, i, 1.0 / static_cast<double>(n)).xi;
        require(alpha > 0, "scaling constraint unreachable");
        s.alpha.push_back(alpha);
        log_prod += std::log(alpha);
    }
    s.xi = std::exp(log_prod / static_cast<double>(n));
    for (double al : s.alpha) s.d.push_back(s.xi / al);
    return s;
}

/// ΛA + U with Λ = 2^Θ, Θ ~ Unif[0,1], U_i ~ Unif[0, 2^T] i.i.d.
struct RandomizedRegion {
    Region region;
    double lambda = 1.0;
    Vec shift;
};

inline RandomizedRegion randomized_shift_scale(const Region& a, int t, std::uint64_t seed) {
    const double dn = static_cast<double>(a.dim());
    require(t > std::log2(a.volume()) / dn + 1.0, "T must exceed (1/n) log V + 1");
    Rng rng(seed);
    const double lambda = std::exp2(rng.uniform());
    Vec u(a.dim());
    for (auto& x : u) x = rng.uniform(0.0, std::exp2(t));
    return {Region::transformed(a, Vec(a.dim(), lambda), u), lambda, u};
}

/// Randomized mean of H(W_{ΛA+U}): log V + n h_{⊖[0,1]^n}(A) + n/2.
/// Given Λ, the shift average is log V + n log Λ + n Σ_k (1{k>=0} - V(A⊖2^{-(k+Θ)}[0,1]^n)/V);
/// averaging Θ turns the sum into the erosion integral and E[n log Λ] = n/2
/// survives. `with_half = false` gives the equality without the n/2 term.
inline Estimate prop2_prediction(const Region& a, const McParams& mc, bool with_half = true) {
    Estimate e = erosion_entropy(a, mc);
    const double dn = static_cast<double>(a.dim());
    e.value = std::log2(a.volume()) + dn * e.value + (with_half ? 0.5 * dn : 0.0);
    e.radius *= dn;
    return e;
}

/// Mean table entropy of ΛA+U over `draws` seeded randomizations, with the
/// standard error of the mean.
struct RandomizedEntropy {
    double mean_lower = 0.0, mean_upper = 0.0;
    double se_upper = 0.0;
    std::size_t draws = 0;
    int t = 0;
};

inline RandomizedEntropy randomized_table_entropy(const Region& a, int k_max, std::size_t draws, std::uint64_t seed) {
    RandomizedEntropy r;
    r.draws = draws;
    r.t = static_cast<int>(std::floor(std::log2(a.volume()) / static_cast<double>(a.dim()) + 1.0)) + 1;
    long double sl = 0, su = 0, sq = 0;
    for (std::size_t d = 0; d < draws; ++d) {
        const RandomizedRegion rr = randomized_shift_scale(a, r.t, derive_seed(seed, d));
        const TableEntropy te = table_entropy(decompose(rr.region, k_max, {.store_entries = false}));
        sl += te.lower;
        su += te.upper;
        sq += static_cast<long double>(te.upper) * te.upper;
    }
    const long double m = su / draws;
    r.mean_lower = static_cast<double>(sl / draws);
    r.mean_upper = static_cast<double>(m);
    r.se_upper = draws > 1 ? std::sqrt(static_cast<double>(std::max(0.0L, (sq / draws - m * m) / (draws - 1)))) : 0.0;
    return r;
}

struct BoundsReport {
    Estimate i_d;
    Estimate erosion;
    TableEntropy h_measured;
    BoundPair thm1;
    bool has_thm1 = false;
    Thm2Report thm2;
    bool has_thm2 = false;
    BoundPair thm3;
    bool has_thm3 = false;
    std::string skipped;  // why a bound was not evaluated

    nlohmann::json to_json() const {
        auto est = [](const Estimate& e) { return nlohmann::json{{"value", e.value}, {"radius", e.radius}}; };
        nlohmann::json j = {{"I_D", est(i_d)},
                            {"erosion_entropy", est(erosion)},
                            {"H", {{"lower", h_measured.lower}, {"upper", h_measured.upper}}}};
        if (has_thm1) j["thm1"] = {{"H", thm1.h_bound}, {"G", thm1.g_bound}};
        if (has_thm2)
            j["thm2"] = {{"H", thm2.truncated.h_bound}, {"G", thm2.truncated.g_bound}, {"projection_H", thm2.projection.h_bound}};
        if (has_thm3) j["thm3"] = {{"H", thm3.h_bound}, {"G", thm3.g_bound}};
        if (!skipped.empty()) j["skipped"] = skipped;
        return j;
    }
};

/// Everything measurable about one region: I_D, erosion entropy, H(W) at
/// depth k_max, and whichever of the bounds apply. Hypographs get the
/// log-concave bound on their density; other regions get the projection and
/// scaled bounds when they are orthogonally convex.
inline BoundsReport bounds_report(const Region& a, int k_max, const McParams& mc) {
    BoundsReport r;
    r.erosion = erosion_entropy(a, mc);
    r.h_measured = table_entropy(decompose(a, k_max, {.store_entries = false}));
    if (a.kind() == RegionKind::Hypograph) {
        const Density& f = a.density();
        r.i_d = dual_total_correlation(f);
        r.thm3 = bound_thm3(f.dim(), r.i_d.value);
        r.has_thm3 = true;
        return r;
    }
    if (a.dim() < 2) {
        r.skipped = "bounds need n >= 2";
        return r;
    }
    r.i_d = dual_total_correlation(a, mc);
    try {
        r.thm1 = bound_thm1(a, mc.seed);
        r.has_thm1 = true;
        r.thm2 = bound_thm2(a, mc.seed);
        r.has_thm2 = true;
    } catch (const InvalidArgument& e) {
        r.skipped = e.what();
    }
    return r;
}

}  // namespace dsim
