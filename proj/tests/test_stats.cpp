#include "test_common.hpp"

namespace {

std::vector<Vec> uniform_samples(const Region& r, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample_uniform(r, rng));
    return out;
}

}  // namespace

TEST_CASE("grid histogram", "[stats]") {
    GridHistogram h(Box({0.0, 0.0}, {2.0, 1.0}), {4, 2});
    CHECK(h.cells() == 8);
    h.add(Vec{0.1, 0.1});
    h.add(Vec{1.9, 0.9});
    h.add(Vec{2.0, 0.5});  // upper edge is outside
    CHECK(h.total() == 3);
    CHECK(h.outside() == 1);
    CHECK(h.count(0) == 1);
    CHECK(h.count(7) == 1);
    const Box c = h.cell_box(7);
    CHECK(c.lo[0] == Approx(1.5));
    CHECK(c.lo[1] == Approx(0.5));
    CHECK(c.hi[0] == 2.0);

    const CellMasses m = cell_masses(GridHistogram(Box({0.0, 0.0}, {2.0, 2.0}), 2), l_shape());
    for (std::size_t i = 0; i < 3; ++i) CHECK(m.cell[i] == Approx(1.0 / 3.0));
    CHECK(m.cell[3] == Approx(0.0).margin(1e-12));
    CHECK(m.outside == Approx(0.0).margin(1e-12));
}

TEST_CASE("chi-square is calibrated under the null", "[stats]") {
    const Region e = example1_ellipse();
    std::vector<double> p;
    for (int rep = 0; rep < 100; ++rep) p.push_back(chi_square_uniform(uniform_samples(e, 2000, 100 + rep), e, 8).p_value);
    const KsResult ks = ks_uniform(p);
    INFO("KS D = " << ks.d);
    CHECK(ks.p_value > 0.001);

    // Shifted samples are rejected.
    auto shifted = uniform_samples(e, 20'000, 7);
    for (auto& x : shifted) x[0] += 0.1;
    const ChiSquareResult bad = chi_square_uniform(shifted, e, 8);
    CHECK(bad.p_value < 1e-6);
    CHECK(bad.impossible > 0);
}

TEST_CASE("chi-square against a density", "[stats]") {
    const Density g = example2_gaussian();
    Rng rng(3);
    GridHistogram h(Box({-1.2, -1.2}, {1.2, 1.2}), 10);
    for (int i = 0; i < 50'000; ++i) h.add(g.sample(rng));
    const ChiSquareResult r = chi_square(h, cell_masses(h, g));
    CHECK(r.p_value > 1e-4);
    CHECK(r.df > 50);
}

TEST_CASE("total variation", "[stats]") {
    const Region e = example1_ellipse();
    const TvEstimate null = empirical_tv(uniform_samples(e, 50'000, 4), e, 16);
    CHECK(null.value < null.noise_floor + null.radius);
    CHECK(null.value > 0.5 * null.noise_floor);

    // Every sample outside the region's box: TV is 1.
    auto far = uniform_samples(e, 1000, 5);
    for (auto& x : far) x[0] += 10.0;
    CHECK(empirical_tv(far, e, 16).value == Approx(1.0));

    // Half the samples outside: about 1/2.
    auto half = uniform_samples(e, 40'000, 6);
    for (std::size_t i = 0; i < half.size(); i += 2) half[i][0] += 10.0;
    const TvEstimate h = empirical_tv(half, e, 16);
    CHECK(std::abs(h.value - 0.5) < h.noise_floor + h.radius);

    const Density g = example2_gaussian();
    Rng rng(9);
    std::vector<Vec> gs;
    for (int i = 0; i < 50'000; ++i) gs.push_back(g.sample(rng));
    const TvEstimate tg = empirical_tv(gs, g, Box({-1.5, -1.5}, {1.5, 1.5}), 12);
    CHECK(tg.value < tg.noise_floor + tg.radius);
}

TEST_CASE("tail exponent", "[stats]") {
    std::vector<double> zipf;
    for (int i = 1; i <= 10'000; ++i) zipf.push_back(std::pow(i, -2.0));
    const TailFit f = tail_exponent(zipf);
    CHECK(f.alpha == Approx(2.0).margin(0.01));
    CHECK(f.r2 > 0.999);
    CHECK(f.first_rank == 1000);
    CHECK(f.last_rank == 9000);

    std::vector<double> scaled = zipf;
    for (auto& x : scaled) x *= 1e-3;
    CHECK(tail_exponent(scaled).alpha == Approx(f.alpha).epsilon(1e-10));

    CHECK_THROWS_AS(tail_exponent(std::vector<double>(500, 0.002)), InvalidArgument);
    CHECK_THROWS_AS(tail_exponent(std::vector<double>(50, 0.02)), InvalidArgument);
    std::vector<double> unsorted = zipf;
    std::swap(unsorted[10], unsorted[20]);
    CHECK_THROWS_AS(tail_exponent(unsorted), InvalidArgument);
}

TEST_CASE("KS and bit bias", "[stats]") {
    Rng rng(12);
    std::vector<double> u, sq;
    for (int i = 0; i < 5000; ++i) {
        u.push_back(rng.uniform());
        sq.push_back(u.back() * u.back());
    }
    CHECK(ks_uniform(u).p_value > 0.001);
    CHECK(ks_uniform(sq).p_value < 1e-10);
    CHECK(ks_uniform({0.5}).d == Approx(0.5));

    std::vector<int> ones(1000, 1);
    CHECK(bit_bias(ones).z == Approx(std::sqrt(1000.0)));
    std::vector<int> alt;
    for (int i = 0; i < 1000; ++i) alt.push_back(i % 2);
    CHECK(bit_bias(alt).z == 0.0);
}

TEST_CASE("conditional independence check", "[stats]") {
    Rng rng(13);
    std::vector<CubeSample> good, bad;
    for (int i = 0; i < 4000; ++i) {
        const DyadicCube c{1, {i % 2, 0}};
        const double lo = 0.5 * (i % 2);
        const double a = lo + 0.5 * rng.uniform(), b = 0.5 * rng.uniform();
        good.push_back({c, {a, b}});
        bad.push_back({c, {a, a - lo}});  // second coordinate copies the first
    }
    const IndependenceReport g = conditional_independence_check(good, 100);
    CHECK_FALSE(g.inconclusive);
    CHECK(g.pass);
    CHECK(g.cubes.size() == 2);
    CHECK(g.tests == 6);

    const IndependenceReport b = conditional_independence_check(bad, 100);
    CHECK_FALSE(b.pass);
    CHECK(b.cubes[0].corr[0] == Approx(1.0));

    const IndependenceReport none = conditional_independence_check(good, 5000);
    CHECK(none.inconclusive);
    CHECK_FALSE(none.pass);
    CHECK(conditional_independence_check(good, 100, 1).cubes.size() == 1);
}
