#pragma once

// Deterministic adaptive quadrature. The traversal order and refinement rule
// are fixed, so identical inputs always produce bit-identical results; the
// arithmetic coder relies on this when generator and agents recompute the
// same child volumes independently.

#include <array>
#include <cmath>
#include <functional>
#include <span>

#include "dsim/types.hpp"

namespace dsim::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
    std::uint64_t evaluations = 0;

    Result& operator+=(const Result& o) {
        value += o.value;
        error += o.error;
        converged = converged && o.converged;
        evaluations += o.evaluations;
        return *this;
    }
};

namespace detail {

// Gauss-Kronrod 7/15 nodes on [-1, 1] (non-negative half).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
Result gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double rk = fc * kWgk[7];
    double rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const double s = f(c - dx) + f(c + dx);
        rk += kWgk[j] * s;
        if (j % 2 == 1) rg += kWg[j / 2] * s;
    }
    return {rk * h, std::abs((rk - rg) * h), true, 15};
}

template <class F>
Result adapt(F& f, double a, double b, double tol, int depth, double noise = 0.0) {
    Result r = gk15(f, a, b);
    // Refinement stops once the error estimate is at the integrand's rounding
    // level, given either relative to the result or as noise per unit length.
    if (r.error <= tol || r.error <= 1e-15 * std::abs(r.value) + noise * (b - a) || depth <= 0 || !(b - a > 1e-300)) {
        if (r.error > tol + noise * (b - a)) r.converged = false;
        return r;
    }
    const double m = 0.5 * (a + b);
    Result left = adapt(f, a, m, 0.5 * tol, depth - 1, noise);
    left += adapt(f, m, b, 0.5 * tol, depth - 1, noise);
    return left;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b] to absolute tolerance.
template <class F>
Result integrate(F&& f, double a, double b, double abs_tol = 1e-12, int max_depth = 40) {
    if (!(b > a)) return {};
    return detail::adapt(f, a, b, abs_tol, max_depth);
}

/// Integrates over [a, b] split at the given interior breakpoints, so that kinks
/// of the integrand sit on panel boundaries.
template <class F>
Result integrate_with_breaks(F&& f, double a, double b, std::span<const double> breaks,
                             double abs_tol = 1e-12, int max_depth = 40, double noise = 0.0) {
    if (!(b > a)) return {};
    std::vector<double> pts{a};
    for (double x : breaks)
        if (x > a && x < b) pts.push_back(x);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    Result total;
    const double width = b - a;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (!(pts[i + 1] > pts[i])) continue;
        total += detail::adapt(f, pts[i], pts[i + 1], abs_tol * (pts[i + 1] - pts[i]) / width, max_depth, noise);
    }
    return total;
}

/// Iterated adaptive integration of f over an n-dimensional box. The innermost
/// axis is the last one.
template <class F>
Result integrate_box(F&& f, const Box& box, double abs_tol = 1e-10, int max_depth = 30) {
    const std::size_t n = box.dim();
    if (n == 0) return {f(std::span<const double>{}), 0.0, true, 1};
    Vec x(n);
    Result total;
    std::function<double(std::size_t)> integrate_axis = [&](std::size_t axis) -> double {
        // Each inner integral is weighted by the measure of the outer axes.
        double outer = 1.0;
        for (std::size_t j = 0; j < axis; ++j) outer *= box.side(j);
        const double tol = abs_tol / std::max(1e-300, outer) * (axis == 0 ? 1.0 : 0.25);
        auto g = [&](double t) {
            x[axis] = t;
            if (axis + 1 == n) {
                ++total.evaluations;
                return f(std::span<const double>(x));
            }
            return integrate_axis(axis + 1);
        };
        Result r = detail::adapt(g, box.lo[axis], box.hi[axis], tol, max_depth);
        if (!r.converged) total.converged = false;
        if (axis == 0) total.error = r.error;
        return r.value;
    };
    total.value = integrate_axis(0);
    return total;
}

}  // namespace dsim::quad
