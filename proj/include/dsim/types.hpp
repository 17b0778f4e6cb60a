#pragma once

// Core value types shared by every dsim module: axis-aligned boxes, dyadic
// cubes C_{k,v} = 2^{-k}([0,1]^n + v), section intervals, estimates and the
// exception hierarchy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsim {

using Vec = std::vector<double>;
using IVec = std::vector<std::int64_t>;

inline constexpr double kLog2E = std::numbers::log2e;  // log e in bits
inline constexpr double kE = std::numbers::e;
inline constexpr double kPi = std::numbers::pi;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t expected, std::size_t got)
        : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                std::to_string(got)) {}
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Raised when a descent does not resolve a decomposition cube by the depth cap.
class DepthExceeded : public Error {
public:
    explicit DepthExceeded(int depth)
        : Error("dyadic descent exceeded depth " + std::to_string(depth)) {}
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

inline void require_dim(std::size_t expected, std::size_t got) {
    if (expected != got) throw DimensionMismatch(expected, got);
}

inline void require_finite(std::span<const double> xs, const char* what) {
    for (double x : xs)
        if (!std::isfinite(x)) throw InvalidArgument(std::string("non-finite parameter: ") + what);
}

/// Closed interval [lo, hi]; empty when lo > hi.
struct Interval {
    double lo = 1.0;
    double hi = 0.0;

    static Interval empty() { return {}; }
    bool is_empty() const { return !(lo <= hi); }
    double length() const { return is_empty() ? 0.0 : hi - lo; }
    bool contains(double x) const { return lo <= x && x <= hi; }
};

inline Interval intersect(Interval a, Interval b) {
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

/// Axis-aligned box prod_i [lo_i, hi_i].
struct Box {
    Vec lo;
    Vec hi;

    Box() = default;
    Box(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {
        require_dim(lo.size(), hi.size());
    }

    static Box unit(std::size_t n) { return Box(Vec(n, 0.0), Vec(n, 1.0)); }

    std::size_t dim() const { return lo.size(); }

    double side(std::size_t i) const { return hi[i] - lo[i]; }

    double volume() const {
        double v = 1.0;
        for (std::size_t i = 0; i < dim(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
        return v;
    }

    double max_side() const {
        double s = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) s = std::max(s, side(i));
        return s;
    }

    double min_side() const {
        double s = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < dim(); ++i) s = std::min(s, side(i));
        return s;
    }

    bool is_empty() const {
        for (std::size_t i = 0; i < dim(); ++i)
            if (!(lo[i] < hi[i])) return true;
        return false;
    }

    bool contains(std::span<const double> x) const {
        for (std::size_t i = 0; i < dim(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }

    bool contains(const Box& b) const {
        for (std::size_t i = 0; i < dim(); ++i)
            if (b.lo[i] < lo[i] || b.hi[i] > hi[i]) return false;
        return true;
    }

    Vec center() const {
        Vec c(dim());
        for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lo[i] + hi[i]);
        return c;
    }

    /// Vertex with bit i of `mask` selecting hi on axis i.
    Vec vertex(std::uint64_t mask) const {
        Vec p(dim());
        for (std::size_t i = 0; i < dim(); ++i) p[i] = (mask >> i) & 1U ? hi[i] : lo[i];
        return p;
    }

    std::uint64_t vertex_count() const { return std::uint64_t{1} << dim(); }
};

inline Box intersect(const Box& a, const Box& b) {
    require_dim(a.dim(), b.dim());
    Box r = a;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        r.lo[i] = std::max(a.lo[i], b.lo[i]);
        r.hi[i] = std::min(a.hi[i], b.hi[i]);
    }
    return r;
}

/// True when the open interiors overlap.
inline bool interiors_overlap(const Box& a, const Box& b) {
    for (std::size_t i = 0; i < a.dim(); ++i)
        if (!(std::max(a.lo[i], b.lo[i]) < std::min(a.hi[i], b.hi[i]))) return false;
    return true;
}

inline std::int64_t floor_div2(std::int64_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

/// The dyadic hypercube C_{k,v} = 2^{-k}([0,1]^n + v).
struct DyadicCube {
    int k = 0;
    IVec v;

    std::size_t dim() const { return v.size(); }
    double side() const { return std::ldexp(1.0, -k); }

    Box box() const {
        Box b(Vec(v.size()), Vec(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            b.lo[i] = std::ldexp(static_cast<double>(v[i]), -k);
            b.hi[i] = std::ldexp(static_cast<double>(v[i] + 1), -k);
        }
        return b;
    }

    DyadicCube parent() const {
        DyadicCube p{k - 1, v};
        for (auto& x : p.v) x = floor_div2(x);
        return p;
    }

    /// Child with lexicographic index `idx` in {0,1}^n + 2v; axis 0 is the most
    /// significant digit so that indices enumerate children in lexicographic order.
    DyadicCube child(std::uint64_t idx) const {
        DyadicCube c{k + 1, v};
        const std::size_t n = v.size();
        for (std::size_t i = 0; i < n; ++i) c.v[i] = 2 * v[i] + static_cast<std::int64_t>((idx >> (n - 1 - i)) & 1U);
        return c;
    }

    /// Index of this cube among its parent's children (inverse of child()).
    std::uint64_t child_index() const {
        std::uint64_t idx = 0;
        for (std::size_t i = 0; i < v.size(); ++i) idx = (idx << 1) | static_cast<std::uint64_t>(v[i] & 1);
        return idx;
    }

    /// Cube at level k containing x under the half-open convention [lo, hi).
    static DyadicCube containing(std::span<const double> x, int k) {
        DyadicCube c{k, IVec(x.size())};
        for (std::size_t i = 0; i < x.size(); ++i)
            c.v[i] = static_cast<std::int64_t>(std::floor(std::ldexp(x[i], k)));
        return c;
    }

    bool contains_half_open(std::span<const double> x) const {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double lo = std::ldexp(static_cast<double>(v[i]), -k);
            const double hi = std::ldexp(static_cast<double>(v[i] + 1), -k);
            if (x[i] < lo || x[i] >= hi) return false;
        }
        return true;
    }

    bool is_ancestor_of(const DyadicCube& other) const {
        if (other.k < k) return false;
        for (std::size_t i = 0; i < v.size(); ++i)
            if ((other.v[i] >> (other.k - k)) != v[i]) return false;
        return true;
    }

    friend bool operator==(const DyadicCube&, const DyadicCube&) = default;

    /// Table order: by level, then lexicographic v.
    friend bool operator<(const DyadicCube& a, const DyadicCube& b) {
        if (a.k != b.k) return a.k < b.k;
        return a.v < b.v;
    }
};

struct DyadicCubeHash {
    std::size_t operator()(const DyadicCube& c) const noexcept {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(c.k);
        for (auto x : c.v) {
            h ^= static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

enum class CubeClass { Inside, Outside, Partial };

inline const char* to_string(CubeClass c) {
    switch (c) {
        case CubeClass::Inside: return "Inside";
        case CubeClass::Outside: return "Outside";
        case CubeClass::Partial: return "Partial";
    }
    return "?";
}

enum class EstimateMethod { Analytic, MonteCarlo, Quadrature };

inline const char* to_string(EstimateMethod m) {
    switch (m) {
        case EstimateMethod::Analytic: return "analytic";
        case EstimateMethod::MonteCarlo: return "monte_carlo";
        case EstimateMethod::Quadrature: return "quadrature";
    }
    return "?";
}

/// A value in bits together with a confidence radius.
struct Estimate {
    double value = 0.0;
    double radius = 0.0;
    EstimateMethod method = EstimateMethod::Analytic;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;

    double lo() const { return value - radius; }
    double hi() const { return value + radius; }
};

inline double log2_safe(double x) { return x > 0 ? std::log2(x) : -std::numeric_limits<double>::infinity(); }

}  // namespace dsim
