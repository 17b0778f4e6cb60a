#pragma once

// Special functions. Incomplete gamma and the normal quantile come from
// Boost.Math; the Kolmogorov tail (not in this Boost) is its alternating series.

#include <cmath>
#include <limits>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "dsim/types.hpp"

namespace dsim::special {

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    require(a > 0, "gamma_p: a must be positive");
    return x <= 0 ? 0.0 : boost::math::gamma_p(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
inline double gamma_q(double a, double x) {
    require(a > 0, "gamma_q: a must be positive");
    return x <= 0 ? 1.0 : boost::math::gamma_q(a, x);
}

/// Solves Q(a, x) = q for x >= 0.
inline double gamma_q_inverse(double a, double q) {
    require(q > 0 && q <= 1, "gamma_q_inverse: q must lie in (0, 1]");
    return q == 1.0 ? 0.0 : boost::math::gamma_q_inv(a, q);
}

/// Upper tail P(chi2_df > x).
inline double chi_square_sf(double x, double df) { return gamma_q(0.5 * df, 0.5 * x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
    require(p > 0 && p < 1, "normal_quantile: p must lie in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2 * p);
}

/// Two-sided critical value z such that P(|N(0,1)| > z) = alpha.
inline double normal_two_sided_critical(double alpha) { return normal_quantile(1.0 - 0.5 * alpha); }

/// Asymptotic Kolmogorov distribution tail P(K > t).
inline double kolmogorov_sf(double t) {
    if (t <= 0) return 1.0;
    if (t < 0.2) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * t * t);
        sum += (j % 2 == 1 ? 1.0 : -1.0) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// p-value of a one-sample KS statistic D over n points (Stephens' correction).
inline double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    return kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
}

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(std::size_t n) {
    const double h = 0.5 * static_cast<double>(n);
    return std::exp(h * std::log(kPi) - std::lgamma(h + 1.0));
}

}  // namespace dsim::special
