#pragma once

// Information measures in bits: erosion entropy, differential entropy, dual
// total correlation and truncated differential entropy, plus the log-concave
// gap quantities. Analytic where a closed form exists, otherwise seeded Monte
// Carlo (chunked, so results do not depend on the thread count) or
// deterministic quadrature.

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include "dsim/geometry.hpp"

namespace dsim {

struct McParams {
    std::uint64_t samples = 100'000;
    std::uint64_t seed = 1;
    double confidence = 0.997;
    unsigned threads = 0;  // 0: hardware concurrency
};

namespace detail {

inline constexpr std::uint64_t kChunk = 4096;

inline double z_of(double confidence) { return special::normal_two_sided_critical(1.0 - confidence); }

}  // namespace detail

/// Mean of draw(rng) over mc.samples draws. Chunk c uses its own generator
/// seeded by derive_seed(seed, c); partial sums are combined in chunk order.
template <class Draw>
Estimate mc_mean(const McParams& mc, Draw&& draw) {
    require(mc.samples >= 1000, "Monte Carlo needs at least 1000 samples");
    const std::uint64_t chunks = (mc.samples + detail::kChunk - 1) / detail::kChunk;
    std::vector<long double> sum(chunks, 0.0L), sq(chunks, 0.0L);
    auto run_chunk = [&](std::uint64_t c) {
        Rng rng(derive_seed(mc.seed, c));
        const std::uint64_t begin = c * detail::kChunk;
        const std::uint64_t end = std::min(mc.samples, begin + detail::kChunk);
        long double s = 0, q = 0;
        for (std::uint64_t i = begin; i < end; ++i) {
            const double v = draw(rng);
            s += v;
            q += static_cast<long double>(v) * v;
        }
        sum[c] = s;
        sq[c] = q;
    };
    unsigned threads = mc.threads ? mc.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, chunks));
    if (threads <= 1) {
        for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex err_mu;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                try {
                    for (std::uint64_t c; (c = next++) < chunks;) run_chunk(c);
                } catch (...) {
                    std::lock_guard lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
    }
    long double s = 0, q = 0;
    for (std::uint64_t c = 0; c < chunks; ++c) {
        s += sum[c];
        q += sq[c];
    }
    const long double n = static_cast<long double>(mc.samples);
    const long double mean = s / n;
    const long double var = std::max(0.0L, (q / n - mean * mean) * n / (n - 1));
    return {static_cast<double>(mean), detail::z_of(mc.confidence) * std::sqrt(static_cast<double>(var) / mc.samples),
            EstimateMethod::MonteCarlo, mc.samples, mc.seed};
}

// --- erosion entropy ---

/// h_{⊖B}(A) = E[-log Φ] with Φ the largest scale of B that fits at a uniform point.
inline Estimate erosion_entropy(const Region& a, const ErosionShape& b, const McParams& mc) {
    require(a.volume() > 0 && std::isfinite(a.volume()), "erosion entropy needs 0 < volume < inf");
    return mc_mean(mc, [&](Rng& rng) {
        const Vec x = sample_uniform(a, rng);
        const double phi = max_inscribed_scale(a, x, b);
        require(std::isfinite(phi), "unbounded inscribed scale");
        return -std::log2(phi);
    });
}

inline Estimate erosion_entropy(const Region& a, const McParams& mc) {
    return erosion_entropy(a, ErosionShape::full_cube(a.dim()), mc);
}

// --- differential entropy ---

inline Estimate differential_entropy(const Density& f) { return {f.entropy(), 1e-12}; }

/// Uniform on a region: log V.
inline Estimate differential_entropy(const Region& a) { return {std::log2(a.volume()), 1e-12}; }

/// -E log f by sampling from f.
inline Estimate differential_entropy_mc(const Density& f, const McParams& mc) {
    return mc_mean(mc, [&](Rng& rng) {
        const Vec x = f.sample(rng);
        const double fx = f(x);
        require(fx > 0, "density vanished at a point sampled from it");
        return -std::log2(fx);
    });
}

// --- dual total correlation ---

namespace detail {

/// Digamma at a positive half-integer or integer.
inline double digamma_half(double x) {
    constexpr double gamma_e = 0.57721566490153286061;
    double v, start;
    if (std::abs(x - std::round(x)) < 1e-12) {
        v = -gamma_e;
        start = 1.0;
    } else {
        v = -gamma_e - 2.0 * std::numbers::ln2;
        start = 0.5;
    }
    for (double t = start; t < x - 0.25; t += 1.0) v += 1.0 / t;
    return v;
}

/// Strips scale/shift layers, which leave I_D unchanged.
inline const Region& strip_transforms(const Region& r) {
    const Region* p = &r;
    while (p->kind() == RegionKind::Transformed) p = &p->children().front();
    return *p;
}

}  // namespace detail

/// Gaussian: h(X) - sum_i h(X_i | rest) with h(X_i | rest) = ½ log(2πe / P_ii).
inline Estimate dual_total_correlation(const Density& f) {
    require(f.dim() >= 2, "dual total correlation needs n >= 2");
    switch (f.kind()) {
        case DensityKind::Gaussian: {
            double v = f.entropy();
            for (std::size_t i = 0; i < f.dim(); ++i) v -= 0.5 * std::log2(2 * kPi * kE / f.precision()(i, i));
            return {v, 1e-12};
        }
        case DensityKind::UniformBox: return {0.0, 0.0};
        case DensityKind::Triangular: break;
    }
    throw InvalidArgument("no dual total correlation path for this density");
}

/// Uniform on a region, by Monte Carlo: log V - sum_i E[log |section_i|].
inline Estimate dual_total_correlation_mc(const Region& a, const McParams& mc = {}) {
    const std::size_t n = a.dim();
    require(n >= 2, "dual total correlation needs n >= 2");
    const double log_v = std::log2(a.volume());
    Estimate e = mc_mean(mc, [&](Rng& rng) {
        const Vec x = sample_uniform(a, rng);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::log2(a.section(i, x).length());
        return s;
    });
    e.value = log_v - e.value;
    return e;
}

/// Uniform on a region. Boxes give 0 and ellipsoids have a closed form;
/// other regions use Monte Carlo.
inline Estimate dual_total_correlation(const Region& a, const McParams& mc = {}) {
    const std::size_t n = a.dim();
    require(n >= 2, "dual total correlation needs n >= 2");
    const Region& base = detail::strip_transforms(a);
    if (base.kind() == RegionKind::AxisBox) return {0.0, 0.0};
    if (base.kind() == RegionKind::Ellipsoid) {
        // The remaining coordinates of a uniform ellipsoid point put |y|^2 ~
        // Beta((n-1)/2, 3/2) in whitened units, so the section length
        // 2 sqrt((1 - |y|^2) / K_ii) has E log = log(2 / sqrt(K_ii)) + ½ (ψ(3/2) - ψ(n/2 + 1)).
        const Mat& k = base.ellipsoid_matrix();
        const double half_gap = 0.5 * (detail::digamma_half(1.5) - detail::digamma_half(0.5 * n + 1.0)) * kLog2E;
        double v = std::log2(base.volume());
        for (std::size_t i = 0; i < n; ++i) v -= std::log2(2.0 / std::sqrt(k(i, i))) + half_gap;
        return {v, 1e-12};
    }
    return dual_total_correlation_mc(a, mc);
}

// --- truncated differential entropy ---

struct TruncatedEntropy {
    double xi = 0.0;
    Estimate h;
};

namespace detail {

/// ξ for a Gaussian at squared Mahalanobis radius r2, and the clipped mass.
inline double gaussian_clipped_mass(const Density& f, double r2) {
    const double n = static_cast<double>(f.dim());
    const double xi = f.sup() * std::exp(-0.5 * r2);
    const double vol = special::unit_ball_volume(f.dim()) * std::pow(r2, 0.5 * n) * std::sqrt(f.covariance().determinant());
    return xi * vol + special::gamma_q(0.5 * n, 0.5 * r2);
}

}  // namespace detail

/// h̃_ζ of a Gaussian in closed form. With r² = 2 ln(sup/ξ) and q the
/// squared Mahalanobis radius (chi-square with n degrees of freedom):
///   ∫ min(ξ, f) = ξ Vol{q < r²} + Q(n/2, r²/2)
///   ∫ g log g  = ξ log ξ Vol{q < r²} + log sup Q(n/2, r²/2) - (log e / 2) n Q(n/2 + 1, r²/2).
inline TruncatedEntropy truncated_entropy_gaussian(const Density& f, double zeta) {
    const double n = static_cast<double>(f.dim());
    if (zeta >= 1.0) return {f.sup(), {f.entropy(), 1e-12}};
    double lo = 0.0, hi = 1.0;
    while (detail::gaussian_clipped_mass(f, hi) > zeta) {
        hi *= 2.0;
        require(hi < 1e6, "truncated entropy: bisection failed to bracket");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (detail::gaussian_clipped_mass(f, mid) > zeta ? lo : hi) = mid;
    }
    const double r2 = 0.5 * (lo + hi);
    const double xi = f.sup() * std::exp(-0.5 * r2);
    const double vol = special::unit_ball_volume(f.dim()) * std::pow(r2, 0.5 * n) * std::sqrt(f.covariance().determinant());
    const double q0 = special::gamma_q(0.5 * n, 0.5 * r2);
    const double q1 = special::gamma_q(0.5 * n + 1.0, 0.5 * r2);
    const double mass = xi * vol + q0;
    const double glogg = xi * std::log2(xi) * vol + std::log2(f.sup()) * q0 - 0.5 * kLog2E * n * q1;
    return {xi, {-glogg / mass + std::log2(mass), 1e-9}};
}

/// h̃_ζ of a density g on a box of dimension 1 or 2 with sup g <= g_max, by
/// quadrature and bisection on ξ (relative 1e-10 on the ζ match).
inline TruncatedEntropy truncated_entropy_quadrature(const std::function<double(std::span<const double>)>& g,
                                                     const Box& support, double g_max, double zeta,
                                                     double tol = 1e-11) {
    require(zeta > 0 && zeta <= 1, "zeta must lie in (0, 1]");
    require(support.dim() >= 1 && support.dim() <= 2, "quadrature path supports dimensions 1 and 2");
    auto integrate = [&](auto&& fn) { return quad::integrate_box(fn, support, tol, 40).value; };
    auto clipped = [&](double xi) { return integrate([&](std::span<const double> y) { return std::min(xi, g(y)); }); };
    const double total = clipped(g_max);
    double xi;
    if (zeta >= 1.0) {
        xi = g_max;
    } else {
        double lo = 0.0, hi = g_max;
        for (int it = 0; it < 80 && hi - lo > 1e-13 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double m = clipped(mid);
            if (std::abs(m - zeta * total) <= 1e-10 * zeta) {
                lo = hi = mid;
                break;
            }
            (m < zeta * total ? lo : hi) = mid;
        }
        xi = 0.5 * (lo + hi);
    }
    const double mass = clipped(xi);
    const double glogg = integrate([&](std::span<const double> y) {
        const double v = std::min(xi, g(y));
        return v > 0 ? v * std::log2(v) : 0.0;
    });
    return {xi, {-glogg / mass + std::log2(mass), 1e-7, EstimateMethod::Quadrature}};
}

inline TruncatedEntropy truncated_entropy(const Density& f, double zeta) {
    require(zeta > 0 && zeta <= 1, "zeta must lie in (0, 1]");
    switch (f.kind()) {
        case DensityKind::Gaussian: return truncated_entropy_gaussian(f, zeta);
        case DensityKind::UniformBox: return {zeta * f.sup(), {f.entropy(), 1e-12}};
        case DensityKind::Triangular:
            return truncated_entropy_quadrature([&](std::span<const double> y) { return f(y); }, f.support(), f.sup(), zeta);
    }
    throw Error("unreachable");
}

/// Marginal density of X_{\drop} for X uniform on the region: |section| / V.
inline std::function<double(std::span<const double>)> region_marginal(const Region& a, std::size_t drop) {
    return [a, drop](std::span<const double> y) {
        Vec x(a.dim());
        for (std::size_t i = 0, j = 0; i < x.size(); ++i) x[i] = i == drop ? 0.0 : y[j++];
        return a.section(drop, x).length() / a.volume();
    };
}

/// h̃_ζ(X_{\drop}) for X uniform on a region of dimension 2 or 3.
inline TruncatedEntropy truncated_marginal_entropy(const Region& a, std::size_t drop, double zeta) {
    require(a.is_bounded(), "marginal truncated entropy needs a bounded region");
    const Box& bb = a.bounding_box();
    const Box support = detail::drop_axis(bb, drop);
    const Region& base = detail::strip_transforms(a);
    if (base.kind() == RegionKind::AxisBox) return {zeta / support.volume(), {std::log2(support.volume()), 1e-12}};
    return truncated_entropy_quadrature(region_marginal(a, drop), support, bb.side(drop) / a.volume(), zeta);
}

// --- log-concave gap quantities ---

struct TruncGapBound {
    double nu = 0.0;          // Γ(n+1, ν) = ζ Γ(n+1), in nats
    double bound = 0.0;       // log ζ + ν log e + n log e
    double simplified = 0.0;  // log ζ + (e + log e) n
    bool simplified_applies = false;  // ζ >= e^{-(e-2)n}
};

inline TruncGapBound logconcave_trunc_gap_bound(std::size_t n, double zeta) {
    require(zeta > 0 && zeta <= 1, "zeta must lie in (0, 1]");
    const double dn = static_cast<double>(n);
    TruncGapBound r;
    r.nu = zeta >= 1.0 ? 0.0 : special::gamma_q_inverse(dn + 1.0, zeta);
    r.bound = std::log2(zeta) + r.nu * kLog2E + dn * kLog2E;
    r.simplified = std::log2(zeta) + (kE + kLog2E) * dn;
    r.simplified_applies = zeta >= std::exp(-(kE - 2.0) * dn);
    return r;
}

/// h(X) + log sup f, which lies in [0, n log e] for log-concave f.
inline double lemma3_gap(const Density& f) { return f.entropy() + std::log2(f.sup()); }

/// Gaussian, m = n - 1 conditioning coordinates:
/// h(X_drop | rest) + log ∫ sup_{x_drop} f dx_rest, which lies in [0, n log e + log n].
inline double lemma4_gap(const Density& f, std::size_t drop) {
    require(f.kind() == DensityKind::Gaussian && f.dim() >= 2, "lemma 4 gap is implemented for Gaussians");
    const double h_cond = 0.5 * std::log2(2 * kPi * kE / f.precision()(drop, drop));
    return h_cond + std::log2(f.integral_of_axis_sup(drop));
}

}  // namespace dsim
