#pragma once

// Statistical checks: grid histograms with Pearson goodness of fit, grid
// total variation with a bootstrap radius, power-law tail fitting of a pmf,
// and per-cube conditional independence of simulated samples.

#include <iomanip>
#include <map>
#include <ostream>
#include <random>

#include "dsim/density.hpp"
#include "dsim/region.hpp"
#include "dsim/special.hpp"

namespace dsim {

/// Counts on a regular grid; points outside `bounds` go to `outside`.
class GridHistogram {
public:
    GridHistogram(Box bounds, std::vector<std::size_t> bins) : bounds_(std::move(bounds)), bins_(std::move(bins)) {
        require_dim(bounds_.dim(), bins_.size());
        std::size_t cells = 1;
        for (auto b : bins_) {
            require(b >= 1, "histogram needs at least one bin per axis");
            cells *= b;
        }
        require(!bounds_.is_empty(), "histogram bounds are empty");
        counts_.assign(cells, 0);
    }

    GridHistogram(Box bounds, std::size_t bins_per_axis)
        : GridHistogram(bounds, std::vector<std::size_t>(bounds.dim(), bins_per_axis)) {}

    void add(std::span<const double> x) {
        require_dim(dim(), x.size());
        ++total_;
        std::size_t idx = 0;
        for (std::size_t i = 0; i < dim(); ++i) {
            const double t = (x[i] - bounds_.lo[i]) / bounds_.side(i);
            if (!(t >= 0.0 && t < 1.0)) {
                ++outside_;
                return;
            }
            idx = idx * bins_[i] + std::min(bins_[i] - 1, static_cast<std::size_t>(t * static_cast<double>(bins_[i])));
        }
        ++counts_[idx];
    }

    std::size_t dim() const { return bins_.size(); }
    std::size_t cells() const { return counts_.size(); }
    const Box& bounds() const { return bounds_; }
    const std::vector<std::size_t>& bins() const { return bins_; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    std::uint64_t count(std::size_t cell) const { return counts_[cell]; }
    std::uint64_t outside() const { return outside_; }
    std::uint64_t total() const { return total_; }

    Box cell_box(std::size_t cell) const {
        Box b = bounds_;
        for (std::size_t i = dim(); i-- > 0;) {
            const std::size_t j = cell % bins_[i];
            cell /= bins_[i];
            const double w = bounds_.side(i) / static_cast<double>(bins_[i]);
            b.lo[i] = bounds_.lo[i] + w * static_cast<double>(j);
            b.hi[i] = j + 1 == bins_[i] ? bounds_.hi[i] : bounds_.lo[i] + w * static_cast<double>(j + 1);
        }
        return b;
    }

    /// CSV: one row per cell with its lower corner and count.
    void write_csv(std::ostream& os) const {
        for (std::size_t i = 0; i < dim(); ++i) os << "lo_" << i + 1 << ',';
        os << "count\n";
        for (std::size_t c = 0; c < cells(); ++c) {
            const Box b = cell_box(c);
            for (std::size_t i = 0; i < dim(); ++i) os << std::setprecision(10) << b.lo[i] << ',';
            os << counts_[c] << '\n';
        }
    }

private:
    Box bounds_;
    std::vector<std::size_t> bins_;
    std::vector<std::uint64_t> counts_;
    std::uint64_t outside_ = 0;
    std::uint64_t total_ = 0;
};

/// Probability of each cell (and of the outside) under a target law.
struct CellMasses {
    std::vector<double> cell;
    double outside = 0.0;
};

/// Uniform law on a region: cell masses from the deterministic clipped volumes.
inline CellMasses cell_masses(const GridHistogram& h, const Region& r) {
    CellMasses m;
    m.cell.resize(h.cells());
    long double in = 0;
    for (std::size_t c = 0; c < h.cells(); ++c) {
        const Box b = h.cell_box(c);
        const CubeClass cls = r.classify(b);
        const double v = cls == CubeClass::Outside ? 0.0 : cls == CubeClass::Inside ? b.volume() : r.clipped_volume(b).value;
        m.cell[c] = v / r.volume();
        in += m.cell[c];
    }
    m.outside = std::max(0.0, static_cast<double>(1.0L - in));
    return m;
}

/// Cell masses of a density. Gaussians use the conditional normal CDF along
/// the last axis; other densities integrate over each cell.
inline CellMasses cell_masses(const GridHistogram& h, const Density& f) {
    require_dim(f.dim(), h.dim());
    CellMasses m;
    m.cell.resize(h.cells());
    long double in = 0;
    const std::size_t n = f.dim();
    for (std::size_t c = 0; c < h.cells(); ++c) {
        const Box b = h.cell_box(c);
        double p = 0.0;
        if (f.kind() == DensityKind::Gaussian && n <= 2) {
            const Mat& k = f.covariance();
            const Vec& mu = f.mean();
            if (n == 1) {
                const double s = std::sqrt(k(0, 0));
                p = special::normal_cdf((b.hi[0] - mu[0]) / s) - special::normal_cdf((b.lo[0] - mu[0]) / s);
            } else {
                const double s1 = std::sqrt(k(0, 0));
                const double beta = k(0, 1) / k(0, 0);
                const double sc = std::sqrt(k(1, 1) - k(0, 1) * beta);
                auto g = [&](double x1) {
                    const double z = (x1 - mu[0]) / s1;
                    const double mc = mu[1] + beta * (x1 - mu[0]);
                    const double band = special::normal_cdf((b.hi[1] - mc) / sc) - special::normal_cdf((b.lo[1] - mc) / sc);
                    return std::exp(-0.5 * z * z) / (s1 * std::sqrt(2 * kPi)) * band;
                };
                p = quad::integrate(g, b.lo[0], b.hi[0], 1e-13, 30).value;
            }
        } else {
            const Box s = intersect(b, f.support());
            if (!s.is_empty()) p = quad::integrate_box([&](std::span<const double> x) { return f(x); }, s, 1e-11, 20).value;
        }
        m.cell[c] = std::max(0.0, p);
        in += m.cell[c];
    }
    m.outside = std::max(0.0, static_cast<double>(1.0L - in));
    return m;
}

struct ChiSquareResult {
    double statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    std::size_t groups = 0;        // pooled cells entering the statistic
    std::size_t merged_cells = 0;  // cells pooled into a neighbour for low expectation
    std::uint64_t impossible = 0;  // observations in zero-mass cells
};

/// Pearson test of the histogram against cell masses. Cells are visited in
/// index order (outside last) and pooled until each group expects >= 5.
inline ChiSquareResult chi_square(const GridHistogram& h, const CellMasses& m, double min_expected = 5.0) {
    require(m.cell.size() == h.cells(), "cell masses do not match the histogram");
    require(h.total() > 0, "empty histogram");
    const double total = static_cast<double>(h.total());
    ChiSquareResult r;
    std::vector<std::pair<double, double>> groups;  // (observed, expected)
    double obs = 0, exp = 0;
    std::size_t members = 0;
    auto visit = [&](double o, double p) {
        if (p <= 0.0) {
            r.impossible += static_cast<std::uint64_t>(o);
            return;
        }
        obs += o;
        exp += p * total;
        ++members;
        if (exp >= min_expected) {
            groups.emplace_back(obs, exp);
            r.merged_cells += members - 1;
            obs = exp = 0;
            members = 0;
        }
    };
    for (std::size_t c = 0; c < h.cells(); ++c) visit(static_cast<double>(h.count(c)), m.cell[c]);
    visit(static_cast<double>(h.outside()), m.outside);
    if (members > 0) {
        r.merged_cells += members;
        if (groups.empty()) {
            groups.emplace_back(obs, exp);
        } else {
            groups.back().first += obs;
            groups.back().second += exp;
        }
    }
    r.groups = groups.size();
    if (r.impossible > 0) {
        r.statistic = std::numeric_limits<double>::infinity();
        r.df = static_cast<double>(r.groups);
        r.p_value = 0.0;
        return r;
    }
    for (auto [o, e] : groups) r.statistic += (o - e) * (o - e) / e;
    r.df = static_cast<double>(r.groups) - 1;
    r.p_value = r.df > 0 ? special::chi_square_sf(r.statistic, r.df) : 1.0;
    return r;
}

/// Uniform-on-region test on `bins` cells per axis over the region's bounding box.
inline ChiSquareResult chi_square_uniform(std::span<const Vec> samples, const Region& r, std::size_t bins) {
    GridHistogram h(r.bounding_box(), bins);
    for (const auto& x : samples) h.add(x);
    return chi_square(h, cell_masses(h, r));
}

struct TvEstimate {
    double value = 0.0;       // grid-projected total variation
    double radius = 0.0;      // bootstrap radius at the requested confidence
    double noise_floor = 0.0; // expected value for samples drawn from the target itself
    std::size_t cells = 0;
};

/// ½ Σ |empirical - target| over the cells and the outside. The radius is a
/// Poisson bootstrap of the counts.
inline TvEstimate empirical_tv(const GridHistogram& h, const CellMasses& m, std::uint64_t seed = 1,
                               std::size_t bootstrap = 200, double confidence = 0.997) {
    require(m.cell.size() == h.cells(), "cell masses do not match the histogram");
    require(h.total() > 0, "empty histogram");
    std::vector<double> obs(h.counts().begin(), h.counts().end());
    obs.push_back(static_cast<double>(h.outside()));
    std::vector<double> tgt = m.cell;
    tgt.push_back(m.outside);
    auto tv_of = [&](const std::vector<double>& o) {
        long double s = 0, tot = 0;
        for (double x : o) tot += x;
        for (std::size_t i = 0; i < o.size(); ++i) s += std::abs(o[i] / tot - tgt[i]);
        return static_cast<double>(0.5L * s);
    };
    TvEstimate e;
    e.cells = obs.size();
    e.value = tv_of(obs);
    const double total = static_cast<double>(h.total());
    for (double p : tgt) e.noise_floor += 0.5 * std::sqrt(2.0 * p * (1 - p) / (kPi * total));
    if (bootstrap > 1) {
        Rng rng(seed);
        std::vector<double> o(obs.size());
        long double s = 0, q = 0;
        for (std::size_t b = 0; b < bootstrap; ++b) {
            for (std::size_t i = 0; i < obs.size(); ++i)
                o[i] = obs[i] > 0 ? static_cast<double>(std::poisson_distribution<std::uint64_t>(obs[i])(rng.engine())) : 0.0;
            const double t = tv_of(o);
            s += t;
            q += static_cast<long double>(t) * t;
        }
        const long double mean = s / bootstrap;
        const double sd = std::sqrt(static_cast<double>(std::max(0.0L, q / bootstrap - mean * mean)));
        e.radius = special::normal_two_sided_critical(1 - confidence) * sd;
    }
    return e;
}

inline TvEstimate empirical_tv(std::span<const Vec> samples, const Density& f, const Box& bounds, std::size_t bins,
                               std::uint64_t seed = 1) {
    GridHistogram h(bounds, bins);
    for (const auto& x : samples) h.add(x);
    return empirical_tv(h, cell_masses(h, f), seed);
}

inline TvEstimate empirical_tv(std::span<const Vec> samples, const Region& r, std::size_t bins, std::uint64_t seed = 1) {
    GridHistogram h(r.bounding_box(), bins);
    for (const auto& x : samples) h.add(x);
    return empirical_tv(h, cell_masses(h, r), seed);
}

struct TailFit {
    double alpha = 0.0;
    double r2 = 0.0;
    std::size_t first_rank = 0, last_rank = 0;  // 1-based, inclusive
    std::size_t atoms = 0;
};

/// Least-squares slope of log p_i against log i over ranks [lo·m, hi·m],
/// sign flipped. `pmf` is sorted in decreasing order.
inline TailFit tail_exponent(std::span<const double> pmf, double lo = 0.1, double hi = 0.9) {
    const std::size_t m = pmf.size();
    if (m < 100) throw InvalidArgument("tail fit needs at least 100 atoms");
    require(0 < lo && lo < hi && hi <= 1, "invalid rank window");
    for (std::size_t i = 1; i < m; ++i) require(pmf[i] <= pmf[i - 1], "pmf must be sorted in decreasing order");
    TailFit f;
    f.atoms = m;
    f.first_rank = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(lo * static_cast<double>(m))));
    f.last_rank = std::min(m, static_cast<std::size_t>(std::floor(hi * static_cast<double>(m))));
    const long double cnt = static_cast<long double>(f.last_rank - f.first_rank + 1);
    long double mx = 0, my = 0;
    for (std::size_t r = f.first_rank; r <= f.last_rank; ++r) {
        require(pmf[r - 1] > 0, "tail fit needs positive probabilities");
        mx += std::log(static_cast<long double>(r));
        my += std::log(static_cast<long double>(pmf[r - 1]));
    }
    mx /= cnt;
    my /= cnt;
    // Centred sums, so a flat pmf leaves vy at rounding level.
    long double vx = 0, vy = 0, cxy = 0;
    for (std::size_t r = f.first_rank; r <= f.last_rank; ++r) {
        const long double x = std::log(static_cast<long double>(r)) - mx;
        const long double y = std::log(static_cast<long double>(pmf[r - 1])) - my;
        vx += x * x;
        vy += y * y;
        cxy += x * y;
    }
    if (!(vy > 1e-24L * cnt)) throw InvalidArgument("tail exponent undefined for a flat pmf");
    f.alpha = static_cast<double>(-cxy / vx);
    f.r2 = static_cast<double>(cxy * cxy / (vx * vy));
    return f;
}

struct KsResult {
    double d = 0.0;
    double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against Unif[0,1].
inline KsResult ks_uniform(std::vector<double> u) {
    require(!u.empty(), "KS test needs data");
    std::sort(u.begin(), u.end());
    const double n = static_cast<double>(u.size());
    double d = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = std::clamp(u[i], 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1) / n - x, x - static_cast<double>(i) / n});
    }
    return {d, special::ks_pvalue(d, u.size())};
}

/// One simulated joint sample with the cube it was generated from.
struct CubeSample {
    DyadicCube cube;
    Vec x;
};

struct CubeCheck {
    DyadicCube cube;
    std::size_t sessions = 0;
    std::vector<double> ks_p;      // per axis
    std::vector<double> corr;      // pairwise r, (i<j) in row order
    double min_p = 1.0;            // smallest per-test p-value in this cube
    bool pass = true;
};

struct IndependenceReport {
    std::vector<CubeCheck> cubes;
    std::size_t tests = 0;
    double alpha = 0.01;
    bool inconclusive = true;
    bool pass = false;
};

/// Within each cube with enough sessions: KS uniformity of every coordinate on
/// the cube side, and a normal test of each pairwise correlation (r √m). All
/// tests share a Bonferroni-corrected level. `max_cubes` keeps the most
/// populated cubes (0: all).
inline IndependenceReport conditional_independence_check(std::span<const CubeSample> samples,
                                                         std::size_t min_sessions, std::size_t max_cubes = 0,
                                                         double alpha = 0.01) {
    std::map<DyadicCube, std::vector<std::size_t>> by_cube;
    for (std::size_t i = 0; i < samples.size(); ++i) by_cube[samples[i].cube].push_back(i);
    std::vector<std::pair<DyadicCube, std::vector<std::size_t>>> pool;
    for (auto& [c, idx] : by_cube)
        if (idx.size() >= min_sessions) pool.emplace_back(c, std::move(idx));
    std::stable_sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });
    if (max_cubes && pool.size() > max_cubes) pool.resize(max_cubes);
    IndependenceReport rep;
    rep.alpha = alpha;
    if (pool.empty()) return rep;
    rep.inconclusive = false;
    const std::size_t n = pool.front().first.dim();
    rep.tests = pool.size() * (n + n * (n - 1) / 2);
    const double level = alpha / static_cast<double>(rep.tests);
    rep.pass = true;
    for (auto& [c, idx] : pool) {
        CubeCheck cc;
        cc.cube = c;
        cc.sessions = idx.size();
        const Box b = c.box();
        std::vector<std::vector<double>> u(n, std::vector<double>(idx.size()));
        for (std::size_t s = 0; s < idx.size(); ++s)
            for (std::size_t i = 0; i < n; ++i) u[i][s] = (samples[idx[s]].x[i] - b.lo[i]) / b.side(i);
        for (std::size_t i = 0; i < n; ++i) {
            cc.ks_p.push_back(ks_uniform(u[i]).p_value);
            cc.min_p = std::min(cc.min_p, cc.ks_p.back());
        }
        const double m = static_cast<double>(idx.size());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                long double si = 0, sj = 0, sii = 0, sjj = 0, sij = 0;
                for (std::size_t s = 0; s < idx.size(); ++s) {
                    si += u[i][s];
                    sj += u[j][s];
                    sii += u[i][s] * u[i][s];
                    sjj += u[j][s] * u[j][s];
                    sij += u[i][s] * u[j][s];
                }
                const long double cov = sij - si * sj / m, vi = sii - si * si / m, vj = sjj - sj * sj / m;
                const double r = vi > 0 && vj > 0 ? static_cast<double>(cov / std::sqrt(vi * vj)) : 1.0;
                cc.corr.push_back(r);
                cc.min_p = std::min(cc.min_p, 2 * (1 - special::normal_cdf(std::abs(r) * std::sqrt(m))));
            }
        cc.pass = cc.min_p >= level;
        rep.pass = rep.pass && cc.pass;
        rep.cubes.push_back(std::move(cc));
    }
    return rep;
}

/// Fair-coin check on a bit sequence: |ones - N/2| within z·√N/2.
struct BitBias {
    std::uint64_t ones = 0, total = 0;
    double z = 0.0;  // standardized deviation
};

template <class Bits>
BitBias bit_bias(const Bits& bits) {
    BitBias b;
    for (std::size_t i = 0; i < bits.size(); ++i) b.ones += bits[i] ? 1 : 0;
    b.total = bits.size();
    if (b.total) b.z = (static_cast<double>(b.ones) - 0.5 * static_cast<double>(b.total)) / (0.5 * std::sqrt(static_cast<double>(b.total)));
    return b;
}

}  // namespace dsim
