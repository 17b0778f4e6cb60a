#include <set>

#include "test_common.hpp"

namespace {

// Closed-ellipse vertex test: a cube lies in a convex body iff its vertices do.
bool cube_in_ellipse(const DyadicCube& c, const Mat& k) {
    const Box b = c.box();
    for (std::uint64_t m = 0; m < b.vertex_count(); ++m) {
        const Vec v = b.vertex(m);
        double q = 0;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) q += v[i] * k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v[j];
        if (q > 1.0) return false;
    }
    return true;
}

// D_k counts by brute force over the grid: cubes inside whose parent is not.
std::map<int, std::uint64_t> brute_force_counts(const Mat& k, int k_lo, int k_hi) {
    std::map<int, std::uint64_t> out;
    for (int lev = k_lo; lev <= k_hi; ++lev) {
        const std::int64_t r = std::int64_t{2} << std::max(lev, 0);  // the ellipse lies in [-2, 2]^2
        for (std::int64_t a = -r; a < r; ++a)
            for (std::int64_t b = -r; b < r; ++b) {
                const DyadicCube c{lev, {a, b}};
                if (cube_in_ellipse(c, k) && !cube_in_ellipse(c.parent(), k)) ++out[lev];
            }
    }
    return out;
}

}  // namespace

TEST_CASE("decompose: trivial tables", "[dyadic]") {
    const DecompositionTable sq = decompose(unit_cube_region(2), 5);
    REQUIRE(sq.entry_count() == 1);
    CHECK(sq.entry(0) == DyadicCube{0, {0, 0}});
    CHECK(sq.residual_mass == 0.0);
    const TableEntropy hs = table_entropy(sq);
    CHECK(hs.lower == 0.0);
    CHECK(hs.upper == 0.0);

    const DecompositionTable l = decompose(l_shape(), 5);
    REQUIRE(l.entry_count() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(l.entry(i).k == 0);
        CHECK(l.probability(i) == Approx(1.0 / 3.0));
    }
    CHECK(l.residual_mass == 0.0);
    const TableEntropy hl = table_entropy(l);
    CHECK(hl.lower == Approx(std::log2(3.0)).epsilon(1e-14));
    CHECK(hl.upper == Approx(std::log2(3.0)).epsilon(1e-14));
}

TEST_CASE("decompose: ellipse level counts match brute force", "[dyadic]") {
    const Region e = example1_ellipse();
    const DecompositionTable t = decompose(e, 7);
    const auto bf = brute_force_counts(e.ellipsoid_matrix(), t.k_root, 7);
    for (int k = t.k_root; k <= 7; ++k) {
        INFO("k = " << k);
        CHECK(t.count_at(k) == (bf.count(k) ? bf.at(k) : 0));
    }
}

TEST_CASE("decompose: ellipse table properties", "[dyadic]") {
    const Region e = example1_ellipse();
    const DecompositionTable t = decompose(e, 11);
    CHECK(t.residual_mass < 0.01);

    long double mass = 0, h = 0;
    for (std::size_t i = 0; i < t.entry_count(); ++i) {
        const long double p = t.probability(i);
        mass += p;
        h -= p * std::log2(p);
    }
    CHECK(static_cast<double>(mass + t.residual_mass) == Approx(1.0).epsilon(1e-12));
    const TableEntropy te = table_entropy(t);
    CHECK(te.lower == Approx(static_cast<double>(h)).epsilon(1e-12));
    CHECK(te.lower <= te.upper);
    CHECK(te.upper - te.lower < 0.2);

    // Entries are inside and maximal: no ancestor is inside.
    for (std::size_t i = 0; i < t.entry_count(); i += 37) {
        const DyadicCube c = t.entry(i);
        CHECK(e.classify(c) == CubeClass::Inside);
        for (DyadicCube p = c.parent(); p.k >= t.k_root; p = p.parent()) CHECK(e.classify(p) != CubeClass::Inside);
    }
}

TEST_CASE("decompose: the bound gap shrinks with depth", "[dyadic]") {
    const Region e = example1_ellipse();
    double prev = 1e9;
    for (int k : {6, 8, 10}) {
        const TableEntropy te = table_entropy(decompose(e, k));
        CHECK(te.upper - te.lower < prev);
        prev = te.upper - te.lower;
    }
}

TEST_CASE("locate", "[dyadic]") {
    CHECK(locate(unit_cube_region(2), Vec{0.3, 0.7}, 5) == DyadicCube{0, {0, 0}});
    CHECK(locate(l_shape(), Vec{1.5, 0.5}, 5) == DyadicCube{0, {1, 0}});
    CHECK_THROWS_AS(locate(l_shape(), Vec{1.5, 1.5}, 5), InvalidArgument);

    // Random points land on table entries.
    const Region e = example1_ellipse();
    const DecompositionTable t = decompose(e, 9);
    std::set<DyadicCube> entries;
    for (std::size_t i = 0; i < t.entry_count(); ++i) entries.insert(t.entry(i));
    Rng rng(21);
    int found = 0;
    for (int s = 0; s < 2000; ++s) {
        const Vec x = sample_uniform(e, rng);
        try {
            const DyadicCube c = locate(e, x, 9);
            CHECK(entries.count(c) == 1);
            CHECK(c.contains_half_open(x));
            ++found;
        } catch (const DepthExceeded&) {
        }
    }
    CHECK(found > 1900);
    // [0, 1/2]^2 is inside (its far vertex gives 1/3); [0, 1]^2 is not (4/3).
    const DyadicCube centre = locate(e, Vec{0.0, 0.0}, 9);
    CHECK(centre == DyadicCube{1, {0, 0}});
    CHECK(entries.count(centre) == 1);
}

TEST_CASE("truncate_table", "[dyadic]") {
    const DecompositionTable l = decompose(l_shape(), 4);
    const DecompositionTable l1 = truncate_table(l, 1, l.entry(0));
    CHECK(l1.entry_count() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(l1.probability(i) == Approx(1.0 / 3.0));

    const DecompositionTable t = decompose(example1_ellipse(), 8);
    std::uint64_t upto3 = 0;
    for (int k = t.k_root; k <= 3; ++k) upto3 += t.count_at(k);
    const DecompositionTable t4 = truncate_table(t, 4, t.entry(0));
    CHECK(t4.entry_count() == upto3);
    double mass = 0;
    for (std::size_t i = 0; i < t4.entry_count(); ++i) mass += t4.probability(i);
    CHECK(mass == Approx(1.0).epsilon(1e-12));
    CHECK(t4.residual_mass == 0.0);

    const DecompositionTable same = truncate_table(t, 100, t.entry(0));
    CHECK(same.entry_count() == t.entry_count());
    CHECK_THROWS_AS(truncate_table(t, 4, DyadicCube{5, {0, 0}}), InvalidArgument);
}

TEST_CASE("sorted pmf and level probabilities", "[dyadic]") {
    const DecompositionTable t = decompose(example1_ellipse(), 8);
    const std::vector<double> p = sorted_pmf(t);
    CHECK(p.size() == t.total_count());
    CHECK(std::is_sorted(p.begin(), p.end(), std::greater<>()));
    CHECK(t.level_probability(0) == Approx(1.0 / example1_ellipse().volume()));

    const DecompositionTable lean = decompose(example1_ellipse(), 8, {.store_entries = false});
    CHECK(lean.total_count() == t.total_count());
    CHECK(table_entropy(lean).lower == Approx(table_entropy(t).lower).epsilon(1e-12));
}
