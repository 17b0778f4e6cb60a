#pragma once

// Sampling and derived geometric queries on regions: uniform points,
// projection volumes VP_{\i}, the largest inscribed scaled copy of an erosion
// shape at a point, and hypograph construction with validation.

#include "dsim/region.hpp"
#include "dsim/special.hpp"

namespace dsim {

struct SampleStats {
    std::uint64_t proposals = 0;
    std::uint64_t accepted = 0;
    double acceptance_rate() const { return proposals ? static_cast<double>(accepted) / proposals : 1.0; }
};

namespace detail {

inline constexpr std::uint64_t kMaxRejections = 10'000'000;  // 1e-6 acceptance floor

inline Vec sample_rejection(const Region& r, Rng& rng, SampleStats& st) {
    const Box& bb = r.bounding_box();
    Vec x(r.dim());
    for (std::uint64_t t = 0; t < kMaxRejections; ++t) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(bb.lo[i], bb.hi[i]);
        ++st.proposals;
        if (r.contains(x)) {
            ++st.accepted;
            return x;
        }
    }
    throw Error("uniform sampler: acceptance rate below 1e-6 (" + std::to_string(st.accepted) + " of " +
                std::to_string(st.proposals) + " proposals accepted)");
}

}  // namespace detail

/// One uniform point on the region. Bounded convex pieces use rejection from
/// their bounding box; hypographs sample x from the density and z uniformly
/// under f(x); unions pick a child with probability proportional to volume.
inline Vec sample_uniform(const Region& r, Rng& rng, SampleStats& st) {
    switch (r.kind()) {
        case RegionKind::AxisBox:
        case RegionKind::Ellipsoid: return detail::sample_rejection(r, rng, st);
        case RegionKind::Hypograph: {
            const Density& f = r.density();
            for (std::uint64_t t = 0; t < detail::kMaxRejections; ++t) {
                Vec x = f.sample(rng);
                const double fx = f(x);
                ++st.proposals;
                if (!(fx > 0)) continue;
                const double z = fx * rng.uniform_open();
                ++st.accepted;
                x.push_back(z);
                return x;
            }
            throw Error("hypograph sampler: density vanished at every draw");
        }
        case RegionKind::Transformed: {
            Vec x = sample_uniform(r.children().front(), rng, st);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = r.scale()[i] * x[i] + r.shift()[i];
            return x;
        }
        case RegionKind::DisjointUnion: {
            double u = rng.uniform() * r.volume();
            for (const auto& c : r.children()) {
                if (u < c.volume()) return sample_uniform(c, rng, st);
                u -= c.volume();
            }
            return sample_uniform(r.children().back(), rng, st);
        }
    }
    throw Error("unreachable");
}

inline Vec sample_uniform(const Region& r, Rng& rng) {
    SampleStats st;
    return sample_uniform(r, rng, st);
}

/// Seeded stream of uniform points with acceptance bookkeeping.
class UniformSampler {
public:
    UniformSampler(Region r, std::uint64_t seed) : region_(std::move(r)), rng_(seed) {}
    Vec next() { return sample_uniform(region_, rng_, stats_); }
    const SampleStats& stats() const { return stats_; }
    Rng& rng() { return rng_; }

private:
    Region region_;
    Rng rng_;
    SampleStats stats_;
};

/// Sampling spot check of pairwise disjointness of a union's children.
inline bool check_disjoint(const Region& u, std::size_t samples_per_child, std::uint64_t seed) {
    if (u.kind() != RegionKind::DisjointUnion) return true;
    Rng rng(seed);
    const auto& ch = u.children();
    for (std::size_t i = 0; i < ch.size(); ++i)
        for (std::size_t s = 0; s < samples_per_child; ++s) {
            const Vec x = sample_uniform(ch[i], rng);
            for (std::size_t j = 0; j < ch.size(); ++j)
                if (j != i && ch[j].contains(x)) return false;
        }
    return true;
}

/// Hypograph of a density after checking its normalization by quadrature
/// and orthogonal concavity by section spot checks.
inline Region build_hypograph(const Density& f, double tol = 1e-6) {
    Region r = Region::hypograph(f);
    const double mass = r.clipped_volume(r.bounding_box()).value;
    if (std::abs(mass - 1.0) > tol) throw InvalidArgument("density does not integrate to 1 (got " + std::to_string(mass) + ")");
    Rng rng(0x5eed);
    for (int t = 0; t < 64; ++t) {
        const Vec p = sample_uniform(r, rng);
        for (std::size_t a = 0; a < r.dim(); ++a) {
            const Interval s = r.section(a, p);
            if (!(s.lo <= p[a] && p[a] <= s.hi)) throw InvalidArgument("density is not orthogonally concave");
        }
    }
    return r;
}

namespace detail {

/// Projection of a box-like child (box, possibly transformed) or nothing.
inline std::optional<Box> as_box(const Region& r) {
    if (r.kind() == RegionKind::AxisBox) return r.box_params();
    if (r.kind() == RegionKind::Transformed) {
        auto b = as_box(r.children().front());
        if (!b) return b;
        for (std::size_t i = 0; i < b->dim(); ++i) {
            b->lo[i] = r.scale()[i] * b->lo[i] + r.shift()[i];
            b->hi[i] = r.scale()[i] * b->hi[i] + r.shift()[i];
        }
        return b;
    }
    return std::nullopt;
}

/// Exact volume of a union of boxes by coordinate compression.
inline double union_of_boxes_volume(const std::vector<Box>& boxes) {
    if (boxes.empty()) return 0.0;
    const std::size_t n = boxes.front().dim();
    if (n == 0) return 1.0;
    std::vector<Vec> cuts(n);
    for (const auto& b : boxes)
        for (std::size_t i = 0; i < n; ++i) {
            cuts[i].push_back(b.lo[i]);
            cuts[i].push_back(b.hi[i]);
        }
    std::size_t cells = 1;
    for (auto& c : cuts) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
        cells *= c.size() - 1;
    }
    require(cells <= 50'000'000, "too many boxes for exact union volume");
    double total = 0.0;
    std::vector<std::size_t> idx(n, 0);
    Vec mid(n);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        std::size_t t = cell;
        double vol = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            idx[i] = t % (cuts[i].size() - 1);
            t /= cuts[i].size() - 1;
            mid[i] = 0.5 * (cuts[i][idx[i]] + cuts[i][idx[i] + 1]);
            vol *= cuts[i][idx[i] + 1] - cuts[i][idx[i]];
        }
        for (const auto& b : boxes)
            if (b.contains(mid)) {
                total += vol;
                break;
            }
    }
    return total;
}

inline Box drop_axis(const Box& b, std::size_t axis) {
    Box r;
    for (std::size_t i = 0; i < b.dim(); ++i)
        if (i != axis) {
            r.lo.push_back(b.lo[i]);
            r.hi.push_back(b.hi[i]);
        }
    return r;
}

}  // namespace detail

/// (n-1)-volume of the projection of the region that drops `drop`.
/// For a hypograph dropping an x-coordinate this is the integral of the
/// axis supremum of f; dropping z from a full-support density is unbounded.
inline Estimate projection_volume(const Region& r, std::size_t drop, std::uint64_t seed = 1,
                                  std::uint64_t samples = 200'000, double confidence = 0.997) {
    require(drop < r.dim(), "axis out of range");
    const std::size_t n = r.dim();
    switch (r.kind()) {
        case RegionKind::AxisBox: return {detail::drop_axis(r.box_params(), drop).volume()};
        case RegionKind::Ellipsoid: {
            if (n == 1) return {1.0};
            const Mat sigma = r.ellipsoid_matrix().inverse();
            return {special::unit_ball_volume(n - 1) * std::exp2(0.5 * log2_det(drop_index(sigma, drop)))};
        }
        case RegionKind::Hypograph: {
            const Density& f = r.density();
            if (drop == n - 1) {
                if (!f.bounded_support()) throw UnboundedProjection("projection of a full-support hypograph onto x is unbounded");
                return {f.support().volume()};
            }
            return {f.integral_of_axis_sup(drop)};
        }
        case RegionKind::Transformed: {
            Estimate e = projection_volume(r.children().front(), drop, seed, samples, confidence);
            double jac = 1.0;
            for (std::size_t i = 0; i < n; ++i)
                if (i != drop) jac *= r.scale()[i];
            e.value *= jac;
            e.radius *= jac;
            return e;
        }
        case RegionKind::DisjointUnion: {
            std::vector<Box> boxes;
            for (const auto& c : r.children()) {
                auto b = detail::as_box(c);
                if (!b) break;
                boxes.push_back(detail::drop_axis(*b, drop));
            }
            if (boxes.size() == r.children().size()) return {detail::union_of_boxes_volume(boxes)};
            require(r.is_bounded(), "projection of an unbounded union");
            const Box pb = detail::drop_axis(r.bounding_box(), drop);
            Rng rng(seed);
            std::uint64_t hits = 0;
            Vec x(n);
            for (std::uint64_t s = 0; s < samples; ++s) {
                for (std::size_t i = 0, j = 0; i < n; ++i) {
                    if (i == drop) continue;
                    x[i] = rng.uniform(pb.lo[j], pb.hi[j]);
                    ++j;
                }
                if (!r.section(drop, x).is_empty()) ++hits;
            }
            const double p = static_cast<double>(hits) / samples;
            const double z = special::normal_two_sided_critical(1.0 - confidence);
            return {pb.volume() * p, pb.volume() * z * std::sqrt(std::max(p * (1 - p), 1.0 / samples) / samples),
                    EstimateMethod::MonteCarlo, samples, seed};
        }
    }
    throw Error("unreachable");
}

/// Erosion shape B: an axis box prod [0, sides_i] or a parallelepiped M[0,1]^n.
struct ErosionShape {
    enum class Kind { AxisBox, Parallelepiped };
    Kind kind = Kind::AxisBox;
    Vec sides;
    Mat m;

    static ErosionShape full_cube(std::size_t n, double beta = 1.0) { return {Kind::AxisBox, Vec(n, beta), {}}; }
    static ErosionShape axis_segment(std::size_t n, std::size_t axis, double beta = 1.0) {
        Vec s(n, 0.0);
        s.at(axis) = beta;
        return {Kind::AxisBox, s, {}};
    }
    static ErosionShape parallelepiped(Mat m) { return {Kind::Parallelepiped, {}, std::move(m)}; }

    /// Index of the single nonzero side, if B is a segment along an axis.
    std::optional<std::size_t> segment_axis() const {
        if (kind != Kind::AxisBox) return std::nullopt;
        std::optional<std::size_t> axis;
        for (std::size_t i = 0; i < sides.size(); ++i)
            if (sides[i] != 0) {
                if (axis) return std::nullopt;
                axis = i;
            }
        return axis;
    }
};

namespace detail {

/// Closed-set membership for convex regions (box, ellipsoid, and their images).
inline bool in_closure(const Region& r, std::span<const double> x) {
    switch (r.kind()) {
        case RegionKind::AxisBox: return r.box_params().contains(x);
        case RegionKind::Ellipsoid: return QuadForm(r.ellipsoid_matrix()).eval(x, r.ellipsoid_center()) <= 1.0;
        case RegionKind::Transformed: {
            Vec y(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - r.shift()[i]) / r.scale()[i];
            return in_closure(r.children().front(), y);
        }
        default: throw InvalidArgument("parallelepiped erosion requires a convex region");
    }
}

}  // namespace detail

/// Phi(p) = sup{gamma >= 0 : p + gamma B ⊆ A}, to relative tolerance 2^-30.
inline double max_inscribed_scale(const Region& r, std::span<const double> p, const ErosionShape& shape) {
    require_dim(r.dim(), p.size());
    const std::size_t n = r.dim();
    if (!r.contains(p)) {
        // A boundary point still counts when the shape points into A from it.
        Vec q(p.begin(), p.end());
        const double h = 0x1.0p-40 * std::max(1.0, r.bounding_box().max_side());
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            if (shape.kind == ErosionShape::Kind::AxisBox) d = shape.sides[i];
            else for (std::size_t j = 0; j < n; ++j) d += shape.m(i, j);
            q[i] += h * d;
        }
        if (!r.contains(q)) throw InvalidArgument("max_inscribed_scale: point is not inside the region");
    }
    if (auto axis = shape.segment_axis()) {
        const Interval s = r.section(*axis, p);
        return std::max(0.0, (s.hi - p[*axis]) / shape.sides[*axis]);
    }
    std::function<bool(double)> fits;
    if (shape.kind == ErosionShape::Kind::AxisBox) {
        require_dim(n, shape.sides.size());
        for (double s : shape.sides) require(s > 0, "erosion box sides must be positive (or describe a single segment)");
        fits = [&](double g) {
            Box b(Vec(p.begin(), p.end()), Vec(p.begin(), p.end()));
            for (std::size_t i = 0; i < n; ++i) b.hi[i] += g * shape.sides[i];
            return r.classify(b) == CubeClass::Inside;
        };
    } else {
        require(r.convexity() == ConvexityClass::Convex, "parallelepiped erosion requires a convex region");
        require_dim(n, static_cast<std::size_t>(shape.m.rows()));
        fits = [&](double g) {
            Vec x(n);
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
                for (std::size_t i = 0; i < n; ++i) {
                    x[i] = p[i];
                    for (std::size_t j = 0; j < n; ++j)
                        if ((mask >> j) & 1U) x[i] += g * shape.m(i, j);
                }
                if (!detail::in_closure(r, x)) return false;
            }
            return true;
        };
    }
    double lo = 0.0, hi = std::max(r.bounding_box().max_side(), 1e-300);
    int guard = 0;
    while (fits(hi) && guard++ < 2000) {
        lo = hi;
        hi *= 2.0;
    }
    require(guard < 2000, "erosion scale is unbounded");
    for (int it = 0; it < 300 && hi - lo > 0x1.0p-30 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (fits(mid)) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline double max_inscribed_scale(const Region& r, std::span<const double> p) {
    return max_inscribed_scale(r, p, ErosionShape::full_cube(r.dim()));
}

}  // namespace dsim
