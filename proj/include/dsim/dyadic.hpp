#pragma once

// Dyadic decomposition of a region: the maximal dyadic cubes contained in A,
// enumerated level by level down to k_max. The pmf of W_A is determined by the
// per-level counts |D_k|, so counts are always kept; explicit entries are
// stored up to a cap.

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "dsim/geometry.hpp"

namespace dsim {

/// Smallest k with 2^-k >= the longest side of the box.
inline int starting_level(const Box& bb) {
    const double side = bb.max_side();
    require(side > 0 && std::isfinite(side), "bounding box must be bounded with positive extent");
    int k = static_cast<int>(std::floor(-std::log2(side)));
    while (std::ldexp(1.0, -k) < side) --k;
    while (std::ldexp(1.0, -(k + 1)) >= side) ++k;
    return k;
}

/// Level-k cubes meeting the box, in lexicographic order.
inline std::vector<DyadicCube> covering_cubes(const Box& bb, int k) {
    const std::size_t n = bb.dim();
    IVec lo(n), hi(n);
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = static_cast<std::int64_t>(std::floor(std::ldexp(bb.lo[i], k)));
        hi[i] = std::max(lo[i], static_cast<std::int64_t>(std::ceil(std::ldexp(bb.hi[i], k))) - 1);
        total *= static_cast<std::uint64_t>(hi[i] - lo[i] + 1);
    }
    require(total <= (1u << 24), "too many root cubes");
    std::vector<DyadicCube> out;
    out.reserve(total);
    IVec v = lo;
    for (std::uint64_t t = 0; t < total; ++t) {
        out.push_back({k, v});
        for (std::size_t i = n; i-- > 0;) {
            if (++v[i] <= hi[i]) break;
            v[i] = lo[i];
        }
    }
    return out;
}

inline std::vector<DyadicCube> root_cubes(const Region& r) {
    const Box& bb = r.bounding_box();
    return covering_cubes(bb, starting_level(bb));
}

struct DecomposeOptions {
    bool store_entries = true;
    std::size_t max_entries = std::size_t{1} << 22;
    bool prune = true;
    /// Also integrate the volume left in unresolved cubes, giving an
    /// independent residual (costly for non-analytic regions).
    bool account_residual = false;
};

struct DecompositionTable {
    std::size_t n = 0;
    int k_root = 0;
    int k_max = 0;
    double volume = 0.0;
    std::vector<std::uint64_t> level_counts;  // index k - k_root
    std::vector<int> entry_level;             // explicit entries
    std::vector<std::int64_t> entry_coords;   // n per entry
    std::vector<double> entry_prob;           // empty: probability from the level
    bool entries_complete = true;
    double residual_mass = 1.0;
    double residual_accounted = -1.0;  // from unresolved-cube volumes, when requested
    std::uint64_t partial_at_kmax = 0;
    std::uint64_t classify_calls = 0;
    int truncated_at = std::numeric_limits<int>::max();

    std::size_t entry_count() const { return entry_level.size(); }

    std::uint64_t total_count() const {
        std::uint64_t s = 0;
        for (auto c : level_counts) s += c;
        return s;
    }

    DyadicCube entry(std::size_t i) const {
        return {entry_level[i], IVec(entry_coords.begin() + static_cast<std::ptrdiff_t>(i * n),
                                     entry_coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * n))};
    }

    double level_probability(int k) const { return std::ldexp(1.0, -static_cast<int>(n) * k) / volume; }

    double probability(std::size_t i) const {
        return entry_prob.empty() ? level_probability(entry_level[i]) : entry_prob[i];
    }

    std::uint64_t count_at(int k) const {
        const int idx = k - k_root;
        return idx >= 0 && idx < static_cast<int>(level_counts.size()) ? level_counts[idx] : 0;
    }

    /// Mass not covered by levels <= k.
    double residual_after(int k) const {
        long double covered = 0;
        for (int j = k_root; j <= std::min(k, k_max); ++j)
            covered += static_cast<long double>(count_at(j)) * std::ldexp(1.0L, -static_cast<int>(n) * j);
        return static_cast<double>(1.0L - covered / volume);
    }
};

namespace detail {

inline void push_entry(DecompositionTable& t, const DyadicCube& c, const DecomposeOptions& opt) {
    ++t.level_counts[c.k - t.k_root];
    if (!opt.store_entries || !t.entries_complete) return;
    if (t.entry_level.size() >= opt.max_entries) {
        t.entries_complete = false;
        t.entry_level.clear();
        t.entry_coords.clear();
        t.entry_level.shrink_to_fit();
        t.entry_coords.shrink_to_fit();
        return;
    }
    t.entry_level.push_back(c.k);
    t.entry_coords.insert(t.entry_coords.end(), c.v.begin(), c.v.end());
}

inline void sort_entries(DecompositionTable& t) {
    const std::size_t m = t.entry_count();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    auto key_less = [&](std::size_t a, std::size_t b) {
        if (t.entry_level[a] != t.entry_level[b]) return t.entry_level[a] < t.entry_level[b];
        return std::lexicographical_compare(t.entry_coords.begin() + static_cast<std::ptrdiff_t>(a * t.n),
                                            t.entry_coords.begin() + static_cast<std::ptrdiff_t>((a + 1) * t.n),
                                            t.entry_coords.begin() + static_cast<std::ptrdiff_t>(b * t.n),
                                            t.entry_coords.begin() + static_cast<std::ptrdiff_t>((b + 1) * t.n));
    };
    std::sort(order.begin(), order.end(), key_less);
    std::vector<int> lv(m);
    std::vector<std::int64_t> co(m * t.n);
    std::vector<double> pr(t.entry_prob.empty() ? 0 : m);
    for (std::size_t i = 0; i < m; ++i) {
        lv[i] = t.entry_level[order[i]];
        std::copy_n(t.entry_coords.begin() + static_cast<std::ptrdiff_t>(order[i] * t.n), t.n,
                    co.begin() + static_cast<std::ptrdiff_t>(i * t.n));
        if (!pr.empty()) pr[i] = t.entry_prob[order[i]];
    }
    t.entry_level = std::move(lv);
    t.entry_coords = std::move(co);
    t.entry_prob = std::move(pr);
}

}  // namespace detail

/// Enumerates D_k(A) for k_root <= k <= k_max by depth-first subdivision from
/// the level-k_root cubes covering the bounding box. A Partial cube whose
/// clipped volume is certainly below 2^{-n k_max} cannot contain a
/// decomposition cube at or above k_max and is pruned.
inline DecompositionTable decompose(const Region& r, int k_max, const DecomposeOptions& opt = {}) {
    require(r.is_bounded() || r.is_hypograph(), "decompose needs a bounded region");
    DecompositionTable t;
    t.n = r.dim();
    t.volume = r.volume();
    const auto roots = root_cubes(r);
    t.k_root = roots.front().k;
    require(k_max >= t.k_root, "k_max is below the starting level " + std::to_string(t.k_root));
    require(k_max - t.k_root <= 62, "k_max too deep");
    t.k_max = k_max;
    t.level_counts.assign(static_cast<std::size_t>(k_max - t.k_root + 1), 0);
    const int n = static_cast<int>(t.n);
    const double prune_below = std::ldexp(1.0, -n * k_max) * (1.0 - 1e-9);
    const std::uint64_t nchild = std::uint64_t{1} << t.n;
    long double unresolved = 0;

    std::vector<DyadicCube> stack(roots.rbegin(), roots.rend());
    while (!stack.empty()) {
        DyadicCube c = std::move(stack.back());
        stack.pop_back();
        const Box b = c.box();
        ++t.classify_calls;
        const CubeClass cls = r.classify(b);
        if (cls == CubeClass::Outside) continue;
        if (cls == CubeClass::Inside) {
            detail::push_entry(t, c, opt);
            continue;
        }
        if (c.k == k_max) {
            ++t.partial_at_kmax;
            if (opt.account_residual) unresolved += r.clipped_volume(b).value;
            continue;
        }
        if (opt.prune && r.clipped_volume_upper(b) < prune_below) {
            if (opt.account_residual) unresolved += r.clipped_volume(b).value;
            continue;
        }
        for (std::uint64_t i = nchild; i-- > 0;) stack.push_back(c.child(i));
    }
    if (t.entries_complete && opt.store_entries) detail::sort_entries(t);
    if (!opt.store_entries) t.entries_complete = false;
    t.residual_mass = std::max(0.0, t.residual_after(k_max));
    if (opt.account_residual) t.residual_accounted = static_cast<double>(unresolved / t.volume);
    return t;
}

/// The decomposition cube containing x, descending from the root cube with
/// half-open containment. Throws DepthExceeded if unresolved at k_max.
inline DyadicCube locate(const Region& r, std::span<const double> x, int k_max) {
    require_dim(r.dim(), x.size());
    const int k0 = starting_level(r.bounding_box());
    for (int k = k0; k <= k_max; ++k) {
        const DyadicCube c = DyadicCube::containing(x, k);
        const CubeClass cls = r.classify(c.box());
        if (cls == CubeClass::Inside) return c;
        if (cls == CubeClass::Outside) throw InvalidArgument("locate: point is outside the region");
    }
    throw DepthExceeded(k_max);
}

struct TableEntropy {
    double lower = 0.0;     // enumerated entries only
    double upper = 0.0;     // residual spread geometrically with the observed decay
    double estimate = 0.0;  // residual spread with ratio 1/2 per level
    double rho = 0.5;       // decay ratio used for `upper`
};

/// Entropy of W_A in bits from the table. The residual mass r sits in cubes
/// below k_max; each such cube has -log p >= n(k_max+1) + log V, and the mass
/// left after each further level is modelled as r rho^j.
inline TableEntropy table_entropy(const DecompositionTable& t) {
    TableEntropy e;
    const double log_v = std::log2(t.volume);
    long double h = 0;
    if (!t.entry_prob.empty()) {
        for (double p : t.entry_prob)
            if (p > 0) h -= p * std::log2(static_cast<long double>(p));
    } else {
        for (int k = t.k_root; k <= t.k_max; ++k) {
            const std::uint64_t c = t.count_at(k);
            if (!c) continue;
            const long double p = std::ldexp(1.0L, -static_cast<int>(t.n) * k) / t.volume;
            h += c * p * (static_cast<long double>(t.n) * k + log_v);
        }
    }
    e.lower = static_cast<double>(h);
    const double r = t.entry_prob.empty() ? t.residual_mass : 0.0;
    if (r <= 0) {
        e.upper = e.estimate = e.lower;
        return e;
    }
    const double prev = t.residual_after(t.k_max - 1);
    double rho = prev > 0 ? r / prev : 0.5;
    rho = std::clamp(rho, 0.5, 0.95);
    e.rho = rho;
    const double base = r * (t.n * (t.k_max + 1.0) + log_v);
    e.upper = e.lower + base + t.n * r * rho / (1 - rho);
    e.estimate = e.lower + base + t.n * r;
    return e;
}

/// Fixed-length truncation: entries with k >= l (and the residual) are
/// merged into `replacement`, which must be an entry with level < l.
inline DecompositionTable truncate_table(const DecompositionTable& t, int l, const DyadicCube& replacement) {
    require(t.entries_complete, "truncate_table needs explicit entries");
    if (l > t.k_max) return t;
    require(replacement.k < l, "replacement must have level below the cutoff");
    DecompositionTable out = t;
    out.entry_level.clear();
    out.entry_coords.clear();
    out.entry_prob.clear();
    out.level_counts.assign(t.level_counts.size(), 0);
    out.truncated_at = l;
    long double moved = t.residual_mass;
    std::ptrdiff_t rep = -1;
    for (std::size_t i = 0; i < t.entry_count(); ++i) {
        const double p = t.probability(i);
        if (t.entry_level[i] >= l) {
            moved += p;
            continue;
        }
        const DyadicCube c = t.entry(i);
        if (c == replacement) rep = static_cast<std::ptrdiff_t>(out.entry_level.size());
        out.entry_level.push_back(c.k);
        out.entry_coords.insert(out.entry_coords.end(), c.v.begin(), c.v.end());
        out.entry_prob.push_back(p);
        ++out.level_counts[c.k - t.k_root];
    }
    require(!out.entry_level.empty(), "no entry has level below the cutoff");
    require(rep >= 0, "replacement is not an entry of the table");
    out.entry_prob[static_cast<std::size_t>(rep)] += static_cast<double>(moved);
    out.residual_mass = 0.0;
    return out;
}

/// Sorted (descending) probabilities of the atoms, expanded from level counts.
inline std::vector<double> sorted_pmf(const DecompositionTable& t) {
    std::vector<double> p;
    if (!t.entry_prob.empty()) {
        p = t.entry_prob;
    } else {
        p.reserve(t.total_count());
        for (int k = t.k_root; k <= t.k_max; ++k) p.insert(p.end(), t.count_at(k), t.level_probability(k));
    }
    std::sort(p.begin(), p.end(), std::greater<>());
    return p;
}

/// CSV `k,v_1..v_n,probability`, sorted by (k, lexicographic v).
inline void write_table_csv(std::ostream& os, const DecompositionTable& t) {
    require(t.entries_complete, "table has no explicit entries to write");
    os << "k";
    for (std::size_t i = 1; i <= t.n; ++i) os << ",v_" << i;
    os << ",probability\n";
    for (std::size_t e = 0; e < t.entry_count(); ++e) {
        os << t.entry_level[e];
        for (std::size_t i = 0; i < t.n; ++i) os << ',' << t.entry_coords[e * t.n + i];
        os << ',' << std::setprecision(17) << t.probability(e) << '\n';
    }
}

}  // namespace dsim
