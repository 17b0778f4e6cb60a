#pragma once

// Densities whose hypographs the region kernel understands. Each family
// supplies pointwise values, exact extrema over boxes, axis sections of its
// superlevel sets, and the closed-form integral of a clamped slice along the
// last coordinate; those are the primitives the hypograph region needs.

#include <memory>
#include <string>

#include "dsim/linalg.hpp"
#include "dsim/random.hpp"
#include "dsim/special.hpp"

namespace dsim {

enum class DensityKind { Gaussian, UniformBox, Triangular };

inline const char* to_string(DensityKind k) {
    switch (k) {
        case DensityKind::Gaussian: return "gaussian";
        case DensityKind::UniformBox: return "uniform_box";
        case DensityKind::Triangular: return "triangular";
    }
    return "?";
}

class Density {
public:
    /// Multivariate normal N(mean, cov).
    static Density gaussian(Vec mean, const std::vector<Vec>& cov) {
        Density d;
        d.kind_ = DensityKind::Gaussian;
        d.n_ = mean.size();
        require(d.n_ >= 1, "density dimension must be positive");
        require_finite(mean, "gaussian mean");
        Mat k = to_mat(cov);
        require_dim(d.n_, static_cast<std::size_t>(k.rows()));
        require(is_symmetric_positive_definite(k), "gaussian covariance must be symmetric positive definite");
        d.mean_ = std::move(mean);
        d.cov_ = k;
        d.prec_ = k.inverse();
        d.prec_ = 0.5 * (d.prec_ + d.prec_.transpose());
        d.pq_ = QuadForm(d.prec_);
        d.chol_ = Eigen::LLT<Mat>(k).matrixL();
        d.log2_det_ = log2_det(k);
        d.sup_ = std::exp(-0.5 * d.n_ * std::log(2 * kPi) - 0.5 * d.log2_det_ * std::numbers::ln2);
        // Effective support: Mahalanobis radius whose chi-square tail is below 1e-13.
        const double r2 = 2.0 * special::gamma_q_inverse(0.5 * d.n_, 1e-13);
        d.support_ = Box(Vec(d.n_), Vec(d.n_));
        for (std::size_t i = 0; i < d.n_; ++i) {
            const double half = std::sqrt(r2 * k(i, i));
            d.support_.lo[i] = d.mean_[i] - half;
            d.support_.hi[i] = d.mean_[i] + half;
        }
        return d;
    }

    /// Uniform density on a box.
    static Density uniform_box(Box b) {
        require(!b.is_empty(), "uniform density needs a box of positive volume");
        require_finite(b.lo, "box lo");
        require_finite(b.hi, "box hi");
        Density d;
        d.kind_ = DensityKind::UniformBox;
        d.n_ = b.dim();
        d.sup_ = 1.0 / b.volume();
        d.support_ = std::move(b);
        return d;
    }

    /// f(x) = 2 - 2x on [0, 1].
    static Density triangular() {
        Density d;
        d.kind_ = DensityKind::Triangular;
        d.n_ = 1;
        d.sup_ = 2.0;
        d.support_ = Box::unit(1);
        return d;
    }

    DensityKind kind() const { return kind_; }
    std::size_t dim() const { return n_; }
    const Vec& mean() const { return mean_; }
    const Mat& covariance() const { return cov_; }
    const Mat& precision() const { return prec_; }
    bool bounded_support() const { return kind_ != DensityKind::Gaussian; }
    bool log_concave() const { return true; }

    /// Support box (for the Gaussian, the box outside of which the mass is < 1e-13).
    const Box& support() const { return support_; }

    double sup() const { return sup_; }

    double operator()(std::span<const double> x) const {
        require_dim(n_, x.size());
        switch (kind_) {
            case DensityKind::Gaussian: return sup_ * std::exp(-0.5 * pq_.eval(x, mean_));
            case DensityKind::UniformBox: return strictly_inside(x) ? sup_ : 0.0;
            case DensityKind::Triangular: return (x[0] > 0 && x[0] < 1) ? 2.0 - 2.0 * x[0] : 0.0;
        }
        return 0.0;
    }

    /// Infimum over a closed box of the closure of f (boundary values taken as
    /// limits from inside the support), so that Inside means closure containment.
    double min_over_box(const Box& b) const {
        switch (kind_) {
            case DensityKind::Gaussian: return sup_ * std::exp(-0.5 * pq_.max_over_box(b, mean_));
            case DensityKind::UniformBox: return support_.contains(b) ? sup_ : 0.0;
            case DensityKind::Triangular:
                return b.lo[0] >= 0 && b.hi[0] <= 1 ? 2.0 - 2.0 * b.hi[0] : 0.0;
        }
        return 0.0;
    }

    /// Supremum of f over a closed box.
    double max_over_box(const Box& b) const {
        switch (kind_) {
            case DensityKind::Gaussian: return sup_ * std::exp(-0.5 * pq_.min_over_box(b, mean_));
            case DensityKind::UniformBox: return interiors_overlap(b, support_) ? sup_ : 0.0;
            case DensityKind::Triangular: {
                if (!(b.hi[0] > 0 && b.lo[0] < 1)) return 0.0;
                return 2.0 - 2.0 * std::max(0.0, b.lo[0]);
            }
        }
        return 0.0;
    }

    /// {t : f(x with x[axis] = t) > z} for z >= 0; an open interval given by its closure.
    Interval superlevel_section(std::size_t axis, std::span<const double> x, double z) const {
        require_dim(n_, x.size());
        require(axis < n_, "axis out of range");
        if (z >= sup_) return Interval::empty();
        switch (kind_) {
            case DensityKind::Gaussian: {
                // q(t) = a s^2 + 2 b s + r with s = t - mean[axis]; need q < 2 ln(sup / z).
                const double a = pq_.at(axis, axis);
                double b = 0.0;
                for (std::size_t j = 0; j < n_; ++j)
                    if (j != axis) b += pq_.at(axis, j) * (x[j] - mean_[j]);
                double r = 0.0;
                for (std::size_t i = 0; i < n_; ++i) {
                    if (i == axis) continue;
                    for (std::size_t j = 0; j < n_; ++j)
                        if (j != axis) r += (x[i] - mean_[i]) * pq_.at(i, j) * (x[j] - mean_[j]);
                }
                const double level = z > 0 ? 2.0 * std::log(sup_ / z) : std::numeric_limits<double>::infinity();
                if (!std::isfinite(level)) return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
                const double disc = b * b - a * (r - level);
                if (disc <= 0) return Interval::empty();
                const double root = std::sqrt(disc);
                return {mean_[axis] + (-b - root) / a, mean_[axis] + (-b + root) / a};
            }
            case DensityKind::UniformBox: {
                for (std::size_t j = 0; j < n_; ++j)
                    if (j != axis && !(x[j] > support_.lo[j] && x[j] < support_.hi[j])) return Interval::empty();
                return {support_.lo[axis], support_.hi[axis]};
            }
            case DensityKind::Triangular: return {0.0, 1.0 - 0.5 * std::max(0.0, z)};
        }
        return Interval::empty();
    }

    /// Integral over t in [a, b] of clamp(f(prefix, t) - z0, 0, h), where the
    /// last coordinate is t and `prefix` holds the first n-1 coordinates.
    double clamped_last_axis_integral(std::span<const double> prefix, double a, double b, double z0, double h) const {
        if (!(b > a) || !(h > 0)) return 0.0;
        const std::size_t last = n_ - 1;
        switch (kind_) {
            case DensityKind::Gaussian: {
                // Along t, f = A exp(-(t - m)^2 / (2 s^2)).
                const double pnn = pq_.at(last, last);
                double shift = 0.0;
                for (std::size_t j = 0; j < last; ++j) shift += pq_.at(last, j) * (prefix[j] - mean_[j]);
                const double m = mean_[last] - shift / pnn;
                const double s = 1.0 / std::sqrt(pnn);
                Vec x(prefix.begin(), prefix.end());
                x.push_back(m);
                const double peak = sup_ * std::exp(-0.5 * pq_.eval(x, mean_));
                auto half_width = [&](double level) {
                    if (level <= 0) return std::numeric_limits<double>::infinity();
                    if (level >= peak) return -1.0;
                    return s * std::sqrt(2.0 * std::log(peak / level));
                };
                auto mass = [&](double u, double v) {  // integral of f over [u, v]
                    const double cu = (u - m) / (s * std::numbers::sqrt2);
                    const double cv = (v - m) / (s * std::numbers::sqrt2);
                    double diff;
                    if (cu >= 0) diff = 0.5 * (std::erfc(cu) - std::erfc(cv));
                    else if (cv <= 0) diff = 0.5 * (std::erfc(-cv) - std::erfc(-cu));
                    else diff = 0.5 * (std::erf(cv) - std::erf(cu));
                    return peak * s * std::sqrt(2 * kPi) * diff;
                };
                const double w0 = half_width(z0);
                if (w0 < 0) return 0.0;
                const double w1 = half_width(z0 + h);
                const double lo0 = std::max(a, m - w0), hi0 = std::min(b, m + w0);
                if (!(hi0 > lo0)) return 0.0;
                double total = mass(lo0, hi0) - z0 * (hi0 - lo0);
                if (w1 >= 0) {
                    const double lo1 = std::max(a, m - w1), hi1 = std::min(b, m + w1);
                    if (hi1 > lo1) total -= mass(lo1, hi1) - (z0 + h) * (hi1 - lo1);
                }
                return std::max(0.0, total);
            }
            case DensityKind::UniformBox: {
                for (std::size_t j = 0; j < last; ++j)
                    if (!(prefix[j] > support_.lo[j] && prefix[j] < support_.hi[j])) return 0.0;
                const double len = std::max(0.0, std::min(b, support_.hi[last]) - std::max(a, support_.lo[last]));
                return len * std::clamp(sup_ - z0, 0.0, h);
            }
            case DensityKind::Triangular: {
                // g(t) = clamp(2 - 2t - z0, 0, h) on [0, 1): linear between t1 and t0.
                const double t0 = 1.0 - 0.5 * z0;        // g = 0 beyond
                const double t1 = 1.0 - 0.5 * (z0 + h);  // g = h before
                const double lo = std::max(a, 0.0), hi = std::min(b, 1.0);
                if (!(hi > lo)) return 0.0;
                double total = 0.0;
                const double flat_hi = std::min(hi, t1);
                if (flat_hi > lo) total += h * (flat_hi - lo);
                const double ramp_lo = std::max(lo, t1), ramp_hi = std::min(hi, t0);
                if (ramp_hi > ramp_lo) {
                    auto prim = [&](double t) { return (2.0 - z0) * t - t * t; };
                    total += prim(ramp_hi) - prim(ramp_lo);
                }
                return total;
            }
        }
        return 0.0;
    }

    /// Differential entropy in bits.
    double entropy() const {
        switch (kind_) {
            case DensityKind::Gaussian: return 0.5 * (n_ * std::log2(2 * kPi * kE) + log2_det_);
            case DensityKind::UniformBox: return std::log2(support_.volume());
            case DensityKind::Triangular: return (0.5 - std::numbers::ln2) * kLog2E;
        }
        return 0.0;
    }

    /// Marginal of all coordinates except `drop` (Gaussian and uniform only).
    Density drop_coordinate(std::size_t drop) const {
        require(n_ >= 2 && drop < n_, "cannot drop that coordinate");
        switch (kind_) {
            case DensityKind::Gaussian: {
                Vec m;
                for (std::size_t i = 0; i < n_; ++i)
                    if (i != drop) m.push_back(mean_[i]);
                return gaussian(std::move(m), from_mat(drop_index(cov_, drop)));
            }
            case DensityKind::UniformBox: {
                Box b;
                for (std::size_t i = 0; i < n_; ++i)
                    if (i != drop) {
                        b.lo.push_back(support_.lo[i]);
                        b.hi.push_back(support_.hi[i]);
                    }
                return uniform_box(std::move(b));
            }
            case DensityKind::Triangular: break;
        }
        throw InvalidArgument("marginal not available for this density");
    }

    /// integral over x_{\drop} of sup_{x_drop} f(x).
    double integral_of_axis_sup(std::size_t drop) const {
        require(drop < n_, "axis out of range");
        switch (kind_) {
            case DensityKind::Gaussian: {
                if (n_ == 1) return sup_;
                const Mat sub = drop_index(cov_, drop);
                return std::sqrt(std::exp2(log2_det(sub) - log2_det_) / (2 * kPi));
            }
            case DensityKind::UniformBox: return 1.0 / support_.side(drop);
            case DensityKind::Triangular: return 2.0;
        }
        return 0.0;
    }

    Vec sample(Rng& rng) const {
        switch (kind_) {
            case DensityKind::Gaussian: {
                Eigen::VectorXd g(n_);
                for (std::size_t i = 0; i < n_; ++i) g[i] = rng.normal();
                const Eigen::VectorXd y = chol_ * g;
                Vec x(n_);
                for (std::size_t i = 0; i < n_; ++i) x[i] = mean_[i] + y[i];
                return x;
            }
            case DensityKind::UniformBox: {
                Vec x(n_);
                for (std::size_t i = 0; i < n_; ++i) x[i] = rng.uniform(support_.lo[i], support_.hi[i]);
                return x;
            }
            case DensityKind::Triangular: return {1.0 - std::sqrt(rng.uniform_open())};
        }
        return {};
    }

    /// For a 2-D density: the x1 values where the clamped slab integral over
    /// x2 in [a, b], z in [z0, z0 + h] fails to be smooth.
    std::vector<double> slab_breaks(double a, double b, double z0, double h) const {
        std::vector<double> out;
        if (dim() != 2) return out;
        switch (kind_) {
            case DensityKind::Gaussian: {
                const double p11 = pq_.at(0, 0), p12 = pq_.at(0, 1), p22 = pq_.at(1, 1);
                for (double z : {z0, z0 + h}) {
                    if (!(z > 0) || !(z < sup_)) continue;
                    const double r2 = 2.0 * std::log(sup_ / z);
                    const double ext = std::sqrt(r2 * cov_(0, 0));
                    out.push_back(mean_[0] - ext);
                    out.push_back(mean_[0] + ext);
                    for (double c : {a, b}) {
                        const double d2 = c - mean_[1];
                        const double disc = p12 * p12 * d2 * d2 - p11 * (p22 * d2 * d2 - r2);
                        if (disc < 0) continue;
                        const double sq = std::sqrt(disc);
                        out.push_back(mean_[0] + (-p12 * d2 - sq) / p11);
                        out.push_back(mean_[0] + (-p12 * d2 + sq) / p11);
                    }
                }
                break;
            }
            case DensityKind::UniformBox:
                out = {support_.lo[0], support_.hi[0]};
                break;
            case DensityKind::Triangular:
                break;
        }
        return out;
    }

private:
    bool strictly_inside(std::span<const double> x) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (!(x[i] > support_.lo[i] && x[i] < support_.hi[i])) return false;
        return true;
    }

    DensityKind kind_ = DensityKind::UniformBox;
    std::size_t n_ = 0;
    Vec mean_;
    Mat cov_, prec_, chol_;
    QuadForm pq_;
    double log2_det_ = 0.0;
    double sup_ = 0.0;
    Box support_;
};

}  // namespace dsim
