#pragma once

// Regions: axis boxes, ellipsoids {x : (x-c)^T K (x-c) < 1}, strict positive
// hypographs of densities, positive diagonal scale + shift images, and
// disjoint unions. A Region is an immutable value sharing its node tree, so
// copies are cheap and concurrent read-only use is safe.
//
// Conventions: point membership is strict (boundaries are outside), while
// classify() answers Inside when the closed box lies in the closure of the
// region. The two agree up to measure zero, which is all the decomposition
// and the coders need.

#include <memory>
#include <optional>
#include <string>

#include "dsim/density.hpp"
#include "dsim/quadrature.hpp"

namespace dsim {

enum class RegionKind { AxisBox, Ellipsoid, Hypograph, Transformed, DisjointUnion };

inline const char* to_string(RegionKind k) {
    switch (k) {
        case RegionKind::AxisBox: return "box";
        case RegionKind::Ellipsoid: return "ellipsoid";
        case RegionKind::Hypograph: return "hypograph";
        case RegionKind::Transformed: return "transformed";
        case RegionKind::DisjointUnion: return "union";
    }
    return "?";
}

enum class ConvexityClass { Convex, OrthogonallyConvexViaQuasiconcavity, UnionOfSuch };

class UnboundedProjection : public Error {
public:
    using Error::Error;
};

class Region;

namespace detail {

struct RegionNode {
    RegionKind kind = RegionKind::AxisBox;
    std::size_t n = 0;
    Box box;                       // AxisBox
    Mat k;                         // Ellipsoid
    QuadForm kq;
    Vec center;
    std::optional<Density> density;  // Hypograph
    Vec scale, shift;              // Transformed
    std::vector<Region> children;  // Transformed (one), DisjointUnion
    Box bbox;
    double volume = 0.0;
    bool bounded = true;
};

}  // namespace detail

class Region {
public:
    Region() = default;

    // --- construction ---

    static Region box(Box b) {
        require(b.dim() >= 1, "region dimension must be positive");
        require_finite(b.lo, "box lo");
        require_finite(b.hi, "box hi");
        require(!b.is_empty(), "box must have positive volume");
        auto node = std::make_shared<detail::RegionNode>();
        node->kind = RegionKind::AxisBox;
        node->n = b.dim();
        node->box = b;
        node->bbox = b;
        node->volume = b.volume();
        return Region(std::move(node));
    }

    /// {x : (x - center)^T K (x - center) < 1}; center defaults to the origin.
    static Region ellipsoid(const std::vector<Vec>& k, Vec center = {}) {
        Mat km = to_mat(k);
        const std::size_t n = static_cast<std::size_t>(km.rows());
        require(n >= 1, "region dimension must be positive");
        require(km.allFinite(), "non-finite parameter: ellipsoid matrix");
        require(is_symmetric_positive_definite(km), "ellipsoid matrix must be symmetric positive definite");
        if (center.empty()) center.assign(n, 0.0);
        require_dim(n, center.size());
        require_finite(center, "ellipsoid center");
        auto node = std::make_shared<detail::RegionNode>();
        node->kind = RegionKind::Ellipsoid;
        node->n = n;
        node->k = km;
        node->kq = QuadForm(km);
        node->center = center;
        const Mat inv = km.inverse();
        node->bbox = Box(Vec(n), Vec(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double half = std::sqrt(inv(i, i));
            node->bbox.lo[i] = center[i] - half;
            node->bbox.hi[i] = center[i] + half;
        }
        node->volume = special::unit_ball_volume(n) * std::exp2(-0.5 * log2_det(km));
        return Region(std::move(node));
    }

    /// Strict positive hypograph {(x, z) : 0 < z < f(x)} in dimension dim(f) + 1.
    static Region hypograph(Density f) {
        auto node = std::make_shared<detail::RegionNode>();
        node->kind = RegionKind::Hypograph;
        node->n = f.dim() + 1;
        Box b = f.support();
        b.lo.push_back(0.0);
        b.hi.push_back(f.sup());
        node->bbox = b;
        node->volume = 1.0;
        node->bounded = f.bounded_support();
        node->density = std::move(f);
        return Region(std::move(node));
    }

    /// {scale * x + shift : x in child}, with positive diagonal scale.
    static Region transformed(const Region& child, Vec scale, Vec shift) {
        const std::size_t n = child.dim();
        if (scale.empty()) scale.assign(n, 1.0);
        if (shift.empty()) shift.assign(n, 0.0);
        require_dim(n, scale.size());
        require_dim(n, shift.size());
        require_finite(scale, "scale");
        require_finite(shift, "shift");
        for (double s : scale) require(s > 0, "scale entries must be positive");
        auto node = std::make_shared<detail::RegionNode>();
        node->kind = RegionKind::Transformed;
        node->n = n;
        node->scale = std::move(scale);
        node->shift = std::move(shift);
        node->children = {child};
        node->bbox = Box(Vec(n), Vec(n));
        node->volume = child.volume();
        for (std::size_t i = 0; i < n; ++i) {
            node->bbox.lo[i] = node->scale[i] * child.bounding_box().lo[i] + node->shift[i];
            node->bbox.hi[i] = node->scale[i] * child.bounding_box().hi[i] + node->shift[i];
            node->volume *= node->scale[i];
        }
        node->bounded = child.is_bounded();
        return Region(std::move(node));
    }

    static Region scaled(const Region& child, Vec scale) { return transformed(child, std::move(scale), {}); }
    static Region shifted(const Region& child, Vec shift) { return transformed(child, {}, std::move(shift)); }

    /// Union of pairwise disjoint children (disjointness is the caller's
    /// contract; see check_disjoint for a sampling spot check).
    static Region disjoint_union(std::vector<Region> children) {
        require(!children.empty(), "union needs at least one child");
        const std::size_t n = children.front().dim();
        auto node = std::make_shared<detail::RegionNode>();
        node->kind = RegionKind::DisjointUnion;
        node->n = n;
        node->bbox = children.front().bounding_box();
        for (const auto& c : children) {
            require_dim(n, c.dim());
            const Box& b = c.bounding_box();
            for (std::size_t i = 0; i < n; ++i) {
                node->bbox.lo[i] = std::min(node->bbox.lo[i], b.lo[i]);
                node->bbox.hi[i] = std::max(node->bbox.hi[i], b.hi[i]);
            }
            node->volume += c.volume();
            node->bounded = node->bounded && c.is_bounded();
        }
        node->children = std::move(children);
        return Region(std::move(node));
    }

    // --- structure ---

    bool valid() const { return static_cast<bool>(node_); }
    RegionKind kind() const { return node_->kind; }
    std::size_t dim() const { return node_->n; }
    const Box& bounding_box() const { return node_->bbox; }
    double volume() const { return node_->volume; }
    bool is_bounded() const { return node_->bounded; }
    const std::vector<Region>& children() const { return node_->children; }
    const Box& box_params() const { return node_->box; }
    const Mat& ellipsoid_matrix() const { return node_->k; }
    const Vec& ellipsoid_center() const { return node_->center; }
    const Density& density() const { return *node_->density; }
    const Vec& scale() const { return node_->scale; }
    const Vec& shift() const { return node_->shift; }

    ConvexityClass convexity() const {
        switch (kind()) {
            case RegionKind::AxisBox:
            case RegionKind::Ellipsoid: return ConvexityClass::Convex;
            case RegionKind::Hypograph: return ConvexityClass::OrthogonallyConvexViaQuasiconcavity;
            case RegionKind::Transformed: return children().front().convexity();
            case RegionKind::DisjointUnion: return ConvexityClass::UnionOfSuch;
        }
        return ConvexityClass::UnionOfSuch;
    }

    /// True for a hypograph, possibly under scale/shift.
    bool is_hypograph() const {
        if (kind() == RegionKind::Hypograph) return true;
        if (kind() == RegionKind::Transformed) return children().front().is_hypograph();
        return false;
    }

    // --- membership ---

    /// Strict (open) membership.
    bool contains(std::span<const double> x) const {
        require_dim(dim(), x.size());
        const auto& nd = *node_;
        switch (nd.kind) {
            case RegionKind::AxisBox:
                for (std::size_t i = 0; i < nd.n; ++i)
                    if (!(x[i] > nd.box.lo[i] && x[i] < nd.box.hi[i])) return false;
                return true;
            case RegionKind::Ellipsoid: return nd.kq.eval(x, nd.center) < 1.0;
            case RegionKind::Hypograph: {
                const double z = x[nd.n - 1];
                return z > 0 && z < (*nd.density)(x.first(nd.n - 1));
            }
            case RegionKind::Transformed: {
                Vec y = to_child(x);
                return nd.children.front().contains(y);
            }
            case RegionKind::DisjointUnion:
                for (const auto& c : nd.children)
                    if (c.contains(x)) return true;
                return false;
        }
        return false;
    }

    // --- cube queries ---

    CubeClass classify(const DyadicCube& c) const {
        require_dim(dim(), c.dim());
        return classify(c.box());
    }

    CubeClass classify(const Box& b) const {
        require_dim(dim(), b.dim());
        const auto& nd = *node_;
        switch (nd.kind) {
            case RegionKind::AxisBox:
                if (nd.box.contains(b)) return CubeClass::Inside;
                if (!interiors_overlap(nd.box, b)) return CubeClass::Outside;
                return CubeClass::Partial;
            case RegionKind::Ellipsoid:
                if (nd.kq.max_over_box(b, nd.center) <= 1.0) return CubeClass::Inside;
                if (nd.kq.min_over_box(b, nd.center) >= 1.0) return CubeClass::Outside;
                return CubeClass::Partial;
            case RegionKind::Hypograph: {
                const std::size_t m = nd.n - 1;
                const double z0 = b.lo[m], z1 = b.hi[m];
                if (z1 <= 0) return CubeClass::Outside;
                const Box xb = x_part(b);
                if (z0 >= 0 && z1 <= nd.density->min_over_box(xb)) return CubeClass::Inside;
                if (z0 >= nd.density->max_over_box(xb)) return CubeClass::Outside;
                return CubeClass::Partial;
            }
            case RegionKind::Transformed: return nd.children.front().classify(to_child(b));
            case RegionKind::DisjointUnion: {
                bool all_outside = true;
                for (const auto& c : nd.children) {
                    const CubeClass cc = c.classify(b);
                    if (cc == CubeClass::Inside) return CubeClass::Inside;
                    if (cc != CubeClass::Outside) all_outside = false;
                }
                if (all_outside) return CubeClass::Outside;
                // Covered jointly by several children?
                const double bv = b.volume();
                if (bv > 0) {
                    double covered = 0.0;
                    for (const auto& c : nd.children) covered += c.clipped_volume(b).value;
                    if (covered >= bv * (1.0 - 1e-12)) return CubeClass::Inside;
                }
                return CubeClass::Partial;
            }
        }
        return CubeClass::Partial;
    }

    /// V_n(A ∩ b). Exact for boxes, intervals and 2-D ellipses; otherwise
    /// deterministic adaptive quadrature with `converged` reporting whether
    /// the requested tolerance was met.
    quad::Result clipped_volume(const Box& b) const {
        require_dim(dim(), b.dim());
        const auto& nd = *node_;
        const double bv = b.volume();
        if (!(bv > 0)) return {};
        switch (nd.kind) {
            case RegionKind::AxisBox: return {intersect(nd.box, b).volume(), 0.0, true, 0};
            case RegionKind::Ellipsoid: {
                const CubeClass cc = classify(b);
                if (cc == CubeClass::Inside) return {bv, 0.0, true, 0};
                if (cc == CubeClass::Outside) return {};
                if (nd.n == 1) {
                    const Interval s = intersect(Interval{nd.bbox.lo[0], nd.bbox.hi[0]}, Interval{b.lo[0], b.hi[0]});
                    return {s.length(), 0.0, true, 0};
                }
                if (nd.n == 2) return {ellipse_rect_area(b), 0.0, true, 0};
                return ellipsoid_quadrature(b);
            }
            case RegionKind::Hypograph: {
                const CubeClass cc = classify(b);
                if (cc == CubeClass::Inside) return {bv, 0.0, true, 0};
                if (cc == CubeClass::Outside) return {};
                return hypograph_quadrature(b);
            }
            case RegionKind::Transformed: {
                quad::Result r = nd.children.front().clipped_volume(to_child(b));
                double jac = 1.0;
                for (double s : nd.scale) jac *= s;
                r.value *= jac;
                r.error *= jac;
                return r;
            }
            case RegionKind::DisjointUnion: {
                quad::Result r;
                for (const auto& c : nd.children) r += c.clipped_volume(b);
                return r;
            }
        }
        return {};
    }

    quad::Result clipped_volume(const DyadicCube& c) const { return clipped_volume(c.box()); }

    /// Cheap upper bound on V_n(A ∩ b), used to prune cubes that cannot contain
    /// a decomposition cube above a given level.
    double clipped_volume_upper(const Box& b) const {
        const auto& nd = *node_;
        switch (nd.kind) {
            case RegionKind::Hypograph: {
                const std::size_t m = nd.n - 1;
                const double z0 = std::max(0.0, b.lo[m]);
                const double h = b.hi[m] - z0;
                if (!(h > 0)) return 0.0;
                const Box xb = x_part(b);
                return xb.volume() * std::clamp(nd.density->max_over_box(xb) - z0, 0.0, h);
            }
            case RegionKind::Transformed: {
                double jac = 1.0;
                for (double s : nd.scale) jac *= s;
                return jac * nd.children.front().clipped_volume_upper(to_child(b));
            }
            case RegionKind::DisjointUnion: {
                double s = 0.0;
                for (const auto& c : nd.children) s += c.clipped_volume_upper(b);
                return std::min(s, b.volume());
            }
            default:
                return classify(b) == CubeClass::Outside ? 0.0 : std::min(b.volume(), intersect(b, nd.bbox).volume());
        }
    }

    /// Closure of the intersection of A with the axis-parallel line through x
    /// (x[axis] is ignored). Throws if that intersection is disconnected.
    Interval section(std::size_t axis, std::span<const double> x) const {
        require_dim(dim(), x.size());
        require(axis < dim(), "axis out of range");
        const auto& nd = *node_;
        switch (nd.kind) {
            case RegionKind::AxisBox:
                for (std::size_t j = 0; j < nd.n; ++j)
                    if (j != axis && !(x[j] > nd.box.lo[j] && x[j] < nd.box.hi[j])) return Interval::empty();
                return {nd.box.lo[axis], nd.box.hi[axis]};
            case RegionKind::Ellipsoid: {
                const double a = nd.kq.at(axis, axis);
                double b = 0.0, r = 0.0;
                for (std::size_t j = 0; j < nd.n; ++j) {
                    if (j == axis) continue;
                    b += nd.kq.at(axis, j) * (x[j] - nd.center[j]);
                    for (std::size_t l = 0; l < nd.n; ++l)
                        if (l != axis) r += (x[j] - nd.center[j]) * nd.kq.at(j, l) * (x[l] - nd.center[l]);
                }
                const double disc = b * b - a * (r - 1.0);
                if (disc <= 0) return Interval::empty();
                const double root = std::sqrt(disc);
                return {nd.center[axis] + (-b - root) / a, nd.center[axis] + (-b + root) / a};
            }
            case RegionKind::Hypograph: {
                const std::size_t m = nd.n - 1;
                if (axis == m) {
                    const double f = (*nd.density)(x.first(m));
                    return f > 0 ? Interval{0.0, f} : Interval::empty();
                }
                if (!(x[m] > 0)) return Interval::empty();
                return nd.density->superlevel_section(axis, x.first(m), x[m]);
            }
            case RegionKind::Transformed: {
                const Interval s = nd.children.front().section(axis, to_child(x));
                if (s.is_empty()) return s;
                return {nd.scale[axis] * s.lo + nd.shift[axis], nd.scale[axis] * s.hi + nd.shift[axis]};
            }
            case RegionKind::DisjointUnion: {
                std::vector<Interval> parts;
                for (const auto& c : nd.children) {
                    const Interval s = c.section(axis, x);
                    if (!s.is_empty() && s.length() > 0) parts.push_back(s);
                }
                if (parts.empty()) return Interval::empty();
                std::sort(parts.begin(), parts.end(), [](const Interval& p, const Interval& q) { return p.lo < q.lo; });
                Interval merged = parts.front();
                for (std::size_t i = 1; i < parts.size(); ++i) {
                    if (parts[i].lo - merged.hi > 1e-12 * (1 + std::abs(merged.hi)))
                        throw InvalidArgument("section is disconnected: region is not orthogonally convex");
                    merged.hi = std::max(merged.hi, parts[i].hi);
                }
                return merged;
            }
        }
        return Interval::empty();
    }

    /// Marginal density of the first dim-1 coordinates of a uniform point on a
    /// (possibly scaled and shifted) hypograph.
    double hypograph_marginal(std::span<const double> x) const {
        const auto& nd = *node_;
        if (nd.kind == RegionKind::Hypograph) return (*nd.density)(x);
        require(nd.kind == RegionKind::Transformed, "not a hypograph");
        const std::size_t m = nd.n - 1;
        Vec y(m);
        double jac = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            y[i] = (x[i] - nd.shift[i]) / nd.scale[i];
            jac *= nd.scale[i];
        }
        return nd.children.front().hypograph_marginal(y) / jac;
    }

private:
    explicit Region(std::shared_ptr<const detail::RegionNode> n) : node_(std::move(n)) {}

    Vec to_child(std::span<const double> x) const {
        const auto& nd = *node_;
        Vec y(nd.n);
        for (std::size_t i = 0; i < nd.n; ++i) y[i] = (x[i] - nd.shift[i]) / nd.scale[i];
        return y;
    }

    Box to_child(const Box& b) const {
        const auto& nd = *node_;
        Box c(Vec(nd.n), Vec(nd.n));
        for (std::size_t i = 0; i < nd.n; ++i) {
            c.lo[i] = (b.lo[i] - nd.shift[i]) / nd.scale[i];
            c.hi[i] = (b.hi[i] - nd.shift[i]) / nd.scale[i];
        }
        return c;
    }

    static Box x_part(const Box& b) {
        const std::size_t m = b.dim() - 1;
        return Box(Vec(b.lo.begin(), b.lo.begin() + m), Vec(b.hi.begin(), b.hi.begin() + m));
    }

    /// Exact area of a 2-D ellipse intersected with a rectangle.
    double ellipse_rect_area(const Box& b) const {
        const auto& nd = *node_;
        const double a = nd.kq.at(0, 0), bb = nd.kq.at(0, 1), d = nd.kq.at(1, 1);
        const double det = a * d - bb * bb;
        const double big_u = std::sqrt(d / det);  // half-width in u = x - cx
        const double sd = std::sqrt(det);
        const double u0 = std::max(b.lo[0] - nd.center[0], -big_u);
        const double u1 = std::min(b.hi[0] - nd.center[0], big_u);
        if (!(u1 > u0)) return 0.0;
        const double w0 = b.lo[1] - nd.center[1], w1 = b.hi[1] - nd.center[1];
        auto root_term = [&](double u) { return std::sqrt(std::max(0.0, big_u * big_u - u * u)); };
        auto upper = [&](double u) { return (-bb * u + sd * root_term(u)) / d; };
        auto lower = [&](double u) { return (-bb * u - sd * root_term(u)) / d; };
        // Antiderivative of sqrt(U^2 - u^2).
        auto circ = [&](double u) {
            const double t = std::clamp(u / big_u, -1.0, 1.0);
            return 0.5 * (u * root_term(u) + big_u * big_u * std::asin(t));
        };
        auto int_upper = [&](double p, double q) { return (-bb * 0.5 * (q * q - p * p) + sd * (circ(q) - circ(p))) / d; };
        auto int_lower = [&](double p, double q) { return (-bb * 0.5 * (q * q - p * p) - sd * (circ(q) - circ(p))) / d; };

        std::array<double, 8> pts{};
        std::size_t np = 0;
        pts[np++] = u0;
        pts[np++] = u1;
        for (double w : {w0, w1}) {
            // Boundary points on the line at height w: a u^2 + 2 b w u + d w^2 - 1 = 0.
            const double disc = bb * bb * w * w - a * (d * w * w - 1.0);
            if (disc > 0) {
                const double r = std::sqrt(disc);
                for (double u : {(-bb * w - r) / a, (-bb * w + r) / a})
                    if (u > u0 && u < u1) pts[np++] = u;
            }
        }
        std::sort(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(np));
        double area = 0.0;
        for (std::size_t i = 0; i + 1 < np; ++i) {
            const double p = pts[i], q = pts[i + 1];
            if (!(q > p)) continue;
            const double mid = 0.5 * (p + q);
            const double up = upper(mid), lo = lower(mid);
            if (up <= w0 || lo >= w1) continue;
            const double top = up < w1 ? int_upper(p, q) : w1 * (q - p);
            const double bottom = lo > w0 ? int_lower(p, q) : w0 * (q - p);
            area += top - bottom;
        }
        return std::clamp(area, 0.0, b.volume());
    }

    quad::Result ellipsoid_quadrature(const Box& b) const {
        const std::size_t n = dim();
        const Box outer(Vec(b.lo.begin(), b.lo.end() - 1), Vec(b.hi.begin(), b.hi.end() - 1));
        Vec x(n);
        auto inner = [&](std::span<const double> y) {
            std::copy(y.begin(), y.end(), x.begin());
            const Interval s = intersect(section(n - 1, x), Interval{b.lo[n - 1], b.hi[n - 1]});
            return s.length();
        };
        return quad::integrate_box(inner, outer, 1e-13 * b.volume() + 1e-300, 30);
    }

    quad::Result hypograph_quadrature(const Box& b) const {
        const auto& nd = *node_;
        const std::size_t m = nd.n - 1;
        const double z0 = std::max(0.0, b.lo[m]);
        const double h = b.hi[m] - z0;
        if (!(h > 0)) return {};
        const Density& f = *nd.density;
        if (m == 1) return {f.clamped_last_axis_integral({}, b.lo[0], b.hi[0], z0, h), 0.0, true, 1};
        if (m == 2) {
            const auto breaks = f.slab_breaks(b.lo[1], b.hi[1], z0, h);
            auto g = [&](double x1) { return f.clamped_last_axis_integral(std::span<const double>(&x1, 1), b.lo[1], b.hi[1], z0, h); };
            // The slab integral cancels terms of size sup * side, or of order one
            // (CDF differences), whichever is larger.
            const double noise = 1e-14 * f.sup() * (b.hi[1] - b.lo[1]) + 4e-16 * std::max(1.0, f.sup());
            return quad::integrate_with_breaks(g, b.lo[0], b.hi[0], breaks, 1e-13 * b.volume() + 1e-300, 30, noise);
        }
        const Box outer(Vec(b.lo.begin(), b.lo.begin() + static_cast<std::ptrdiff_t>(m - 1)),
                        Vec(b.hi.begin(), b.hi.begin() + static_cast<std::ptrdiff_t>(m - 1)));
        auto inner = [&](std::span<const double> y) {
            return f.clamped_last_axis_integral(y, b.lo[m - 1], b.hi[m - 1], z0, h);
        };
        return quad::integrate_box(inner, outer, 1e-13 * b.volume() + 1e-300, 30);
    }

    std::shared_ptr<const detail::RegionNode> node_;
};

// --- standard fixtures ---

inline Region unit_cube_region(std::size_t n) { return Region::box(Box::unit(n)); }

/// [0,1]x[0,2] ∪ [1,2]x[0,1].
inline Region l_shape() {
    return Region::disjoint_union({Region::box(Box({0.0, 0.0}, {1.0, 2.0})), Region::box(Box({1.0, 0.0}, {2.0, 1.0}))});
}

/// The 2-D ellipse with matrix [[4/3, -2/3], [-2/3, 4/3]] centred at the origin.
inline Region example1_ellipse() {
    return Region::ellipsoid({{4.0 / 3.0, -2.0 / 3.0}, {-2.0 / 3.0, 4.0 / 3.0}});
}

/// The Gaussian with covariance [[1/8, 1/16], [1/16, 1/8]].
inline Density example2_gaussian() {
    return Density::gaussian({0.0, 0.0}, {{1.0 / 8.0, 1.0 / 16.0}, {1.0 / 16.0, 1.0 / 8.0}});
}

}  // namespace dsim
