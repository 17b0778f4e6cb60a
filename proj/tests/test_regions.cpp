#include "test_common.hpp"

TEST_CASE("classify cubes", "[regions]") {
    const Region sq = unit_cube_region(2);
    CHECK(sq.classify(DyadicCube{0, {0, 0}}) == CubeClass::Inside);
    CHECK(sq.classify(DyadicCube{0, {5, 5}}) == CubeClass::Outside);
    // [0,2]^2: the vertex (2,2) is outside the ellipse, points near the origin inside.
    CHECK(example1_ellipse().classify(DyadicCube{-1, {0, 0}}) == CubeClass::Partial);
    CHECK(l_shape().classify(DyadicCube{-1, {0, 0}}) == CubeClass::Partial);
    CHECK(l_shape().classify(DyadicCube{0, {1, 1}}) == CubeClass::Outside);
}

TEST_CASE("clipped volume", "[regions]") {
    CHECK(unit_cube_region(2).clipped_volume(DyadicCube{1, {0, 0}}.box()).value == Approx(0.25));
    CHECK(l_shape().clipped_volume(DyadicCube{-1, {0, 0}}.box()).value == Approx(3.0));

    const Region e = example1_ellipse();
    const Box b = DyadicCube{0, {0, 0}}.box();
    const auto [mc, r] = mc_clipped_volume(e, b, 2'000'000, 11);
    CHECK(std::abs(e.clipped_volume(b).value - mc) <= r);

    // A box straddling the boundary of a shifted ellipse.
    const Region es = Region::shifted(e, {1.3, 1.3});
    const Box b2({0.5, 1.0}, {1.25, 1.75});
    const auto [mc2, r2] = mc_clipped_volume(es, b2, 2'000'000, 12);
    CHECK(std::abs(es.clipped_volume(b2).value - mc2) <= r2);
}

TEST_CASE("ellipse volume", "[regions]") {
    // π / sqrt(det K), det K = 4/3.
    CHECK(example1_ellipse().volume() == Approx(kPi / std::sqrt(4.0 / 3.0)).epsilon(1e-12));
    CHECK(unit_disk().volume() == Approx(kPi));
}

TEST_CASE("sections", "[regions]") {
    const Vec p{0.3, 0.5};
    const Interval s = unit_cube_region(2).section(1, p);
    CHECK(s.lo == 0.0);
    CHECK(s.hi == 1.0);
    const Interval d0 = unit_disk().section(1, Vec{0.0, 0.0});
    CHECK(d0.lo == Approx(-1.0));
    CHECK(d0.hi == Approx(1.0));
    const Interval d6 = unit_disk().section(1, Vec{0.6, 0.0});
    CHECK(d6.lo == Approx(-0.8));
    CHECK(d6.hi == Approx(0.8));
    CHECK(unit_disk().section(1, Vec{1.5, 0.0}).is_empty());
}

TEST_CASE("projection volumes", "[regions]") {
    // 2 sqrt(K11 / det K) = 2 sqrt((4/3)/(4/3)) = 2.
    CHECK(projection_volume(example1_ellipse(), 1).value == Approx(2.0).margin(1e-6));
    for (std::size_t i = 0; i < 3; ++i) CHECK(projection_volume(unit_cube_region(3), i).value == Approx(1.0));
    CHECK(projection_volume(l_shape(), 0).value == Approx(2.0).margin(1e-6));
    const Region el = Region::ellipsoid({{10000.0, 0.0}, {0.0, 1.0}});
    CHECK(projection_volume(el, 0).value == Approx(2.0).margin(1e-6));
    CHECK(projection_volume(el, 1).value == Approx(0.02).margin(1e-8));
}

TEST_CASE("max inscribed scale", "[regions]") {
    CHECK(max_inscribed_scale(unit_cube_region(2), Vec{0.0, 0.0}) == Approx(1.0));
    CHECK(max_inscribed_scale(unit_cube_region(2), Vec{0.5, 0.5}) == Approx(0.5));
    CHECK(max_inscribed_scale(unit_disk(), Vec{0.0, 0.0}) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    CHECK(max_inscribed_scale(l_shape(), Vec{0.0, 0.0}) == Approx(1.0));
    CHECK(max_inscribed_scale(l_shape(), Vec{0.5, 1.5}) == Approx(0.5));
}

TEST_CASE("uniform sampling", "[regions]") {
    const std::size_t n = 100'000;
    SECTION("unit square mean") {
        Rng rng(3);
        double s0 = 0, s1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec x = sample_uniform(unit_cube_region(2), rng);
            REQUIRE(unit_cube_region(2).contains(x));
            s0 += x[0];
            s1 += x[1];
        }
        const double tol = 3 * std::sqrt(1.0 / 12.0 / n);
        CHECK(std::abs(s0 / n - 0.5) < tol);
        CHECK(std::abs(s1 / n - 0.5) < tol);
    }
    SECTION("ellipse mean is the centre") {
        Rng rng(4);
        const Region e = example1_ellipse();
        double s0 = 0, s1 = 0, q0 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec x = sample_uniform(e, rng);
            REQUIRE(e.contains(x));
            s0 += x[0];
            s1 += x[1];
            q0 += x[0] * x[0];
        }
        const double tol = 3 * std::sqrt(q0 / n / n);
        CHECK(std::abs(s0 / n) < tol);
        CHECK(std::abs(s1 / n) < tol);
    }
    SECTION("L-shape arm mass is 1/3") {
        Rng rng(5);
        std::size_t arm = 0;
        for (std::size_t i = 0; i < n; ++i) arm += sample_uniform(l_shape(), rng)[0] >= 1.0;
        CHECK(std::abs(static_cast<double>(arm) / n - 1.0 / 3.0) < 3 * std::sqrt(2.0 / 9.0 / n));
    }
}

TEST_CASE("hypographs", "[regions]") {
    const Region u = build_hypograph(Density::uniform_box(Box({0.0}, {1.0})));
    CHECK(u.dim() == 2);
    CHECK(u.volume() == Approx(1.0).epsilon(1e-6));

    const Region g = build_hypograph(example2_gaussian());
    CHECK(g.dim() == 3);
    CHECK(g.volume() == Approx(1.0).epsilon(1e-6));

    const Region t = build_hypograph(Density::triangular());
    CHECK(t.volume() == Approx(1.0).epsilon(1e-6));
    const Interval s = t.section(1, Vec{0.5, 0.0});
    CHECK(s.lo == Approx(0.0).margin(1e-12));
    CHECK(s.hi == Approx(1.0));
}

TEST_CASE("region errors", "[regions]") {
    CHECK_THROWS_AS(Region::box(Box({0.0}, {0.0, 1.0})), Error);
    CHECK_THROWS_AS(Region::ellipsoid({{1.0, 2.0}, {2.0, 1.0}}), InvalidArgument);  // indefinite
    CHECK_THROWS_AS(unit_cube_region(2).contains(Vec{0.5}), DimensionMismatch);
    CHECK_THROWS_AS(resolve_region("no-such-fixture"), InvalidArgument);
}

TEST_CASE("region JSON round trip", "[regions]") {
    for (const Region& r : {l_shape(), example1_ellipse(), Region::hypograph(example2_gaussian()),
                            Region::transformed(Region::shifted(unit_cube_region(2), {1.0, 2.0}), {2.0, 0.5}, {0.25, 0.0})}) {
        const Region back = region_from_json(region_to_json(r));
        CHECK(back.dim() == r.dim());
        CHECK(back.volume() == Approx(r.volume()).epsilon(1e-9));
        Rng rng(9);
        const Box bb = r.is_bounded() ? r.bounding_box() : Box(Vec(r.dim(), -2.0), Vec(r.dim(), 2.0));
        for (int i = 0; i < 200; ++i) {
            Vec x(r.dim());
            for (std::size_t j = 0; j < r.dim(); ++j) x[j] = rng.uniform(bb.lo[j], bb.hi[j]);
            CHECK(back.contains(x) == r.contains(x));
        }
    }
    CHECK_THROWS_AS(region_from_json(nlohmann::json{{"kind", "torus"}}), InvalidArgument);
    CHECK_THROWS_AS(region_from_json(nlohmann::json{{"kind", "box"}, {"n", 3}, {"params", {{"lo", {0, 0}}, {"hi", {1, 1}}}}}),
                    DimensionMismatch);
}
