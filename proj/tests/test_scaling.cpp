#include "test_common.hpp"

namespace {

const Region& elongated() {
    static const Region r = Region::ellipsoid({{10000.0, 0.0}, {0.0, 1.0}});
    return r;
}

// Projection-bound core for an ellipse by hand: VP_{\i} = 2 sqrt(K_jj / det K), V = π / sqrt(det K).
double thm1_ellipse(double k11, double k12, double k22) {
    const double det = k11 * k22 - k12 * k12;
    const double sum_vp = 2 * std::sqrt(k22 / det) + 2 * std::sqrt(k11 / det);
    return 2 * std::log2(sum_vp) - std::log2(kPi / std::sqrt(det)) + 2 * (2 + kLog2E);
}

}  // namespace

TEST_CASE("projection bound", "[scaling]") {
    // Unit square: 2 log 2 - 0 + 2 (2 + log e).
    CHECK(bound_thm1(unit_cube_region(2)).h_bound == Approx(6 + 2 * kLog2E).epsilon(1e-6));
    CHECK(bound_thm1(unit_cube_region(2)).h_bound == Approx(8.885).margin(1e-3));
    CHECK(bound_thm1(unit_cube_region(2)).g_bound == Approx(2 + 2 * kLog2E).epsilon(1e-6));

    CHECK(bound_thm1(example1_ellipse()).h_bound == Approx(thm1_ellipse(4.0 / 3, -2.0 / 3, 4.0 / 3)).epsilon(1e-6));
    CHECK(bound_thm1(elongated()).h_bound == Approx(thm1_ellipse(10000, 0, 1)).epsilon(1e-6));
    CHECK(bound_thm1(elongated()).h_bound == Approx(13.9065).margin(1e-3));

    // The bound holds against the measured table entropy.
    CHECK(table_entropy(decompose(example1_ellipse(), 10)).upper <= bound_thm1(example1_ellipse()).h_bound);
}

TEST_CASE("scaled truncated-entropy bound", "[scaling]") {
    // Diagonal ellipses: log(1/π) + 8 + 2 log e.
    CHECK(thm2_ellipse_closed_form(10000, 0, 1) == Approx(9.234).margin(1e-3));
    CHECK(thm2_ellipse_closed_form(1, 0, 1) == Approx(-std::log2(kPi) + 8 + 2 * kLog2E));

    for (const Region& r : {elongated(), example1_ellipse()}) {
        const Mat& k = r.ellipsoid_matrix();
        const Thm2Report rep = bound_thm2(r);
        CHECK(rep.projection.h_bound == Approx(thm2_ellipse_closed_form(k(0, 0), k(0, 1), k(1, 1))).epsilon(1e-6));
        // h̃ <= log of the support length.
        for (std::size_t i = 0; i < 2; ++i) CHECK(rep.trunc_entropy[i] <= rep.log_vp[i] + 1e-9);
        CHECK(rep.truncated.h_bound <= rep.projection.h_bound + 1e-9);
        CHECK(rep.truncated.h_bound - rep.truncated.g_bound == Approx(4.0));
    }
    // The scaled bound does not depend on the elongation; the projection bound does.
    CHECK(bound_thm2(elongated()).truncated.h_bound == Approx(bound_thm2(unit_disk()).truncated.h_bound).epsilon(1e-6));
    CHECK(bound_thm1(elongated()).h_bound > bound_thm2(elongated()).projection.h_bound + 4);
    CHECK_THROWS_AS(bound_thm2(unit_cube_region(1)), InvalidArgument);
}

TEST_CASE("diagonal scaling", "[scaling]") {
    const ScalingMatrix s = find_scaling(unit_disk());
    CHECK(s.d[0] == Approx(1.0).epsilon(1e-9));
    CHECK(s.d[1] == Approx(1.0).epsilon(1e-9));

    // Semi-axes 0.01 and 1: scaling by (10, 0.1) makes both 0.1.
    const ScalingMatrix e = find_scaling(elongated());
    CHECK(e.d[0] == Approx(10.0).epsilon(1e-6));
    CHECK(e.d[1] == Approx(0.1).epsilon(1e-6));
    CHECK(e.d[0] * e.d[1] == Approx(1.0).epsilon(1e-12));

    const ScalingMatrix ex = find_scaling(example1_ellipse());
    CHECK(ex.d[0] == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("log-concave bound", "[scaling]") {
    const BoundPair b = bound_thm3(2, 0.0);
    CHECK(b.h_bound == Approx(4 * kLog2E + 2 * (1 + std::log2(3.0) + kE + 2 * kLog2E + 2) + 2 + kLog2E));
    CHECK(b.h_bound == Approx(29.5907).margin(1e-3));
    CHECK(b.g_bound == Approx(23.7708).margin(1e-3));
    CHECK(bound_thm3(2, 0.5).h_bound - b.h_bound == Approx(0.5));
}

TEST_CASE("random shift and scale", "[scaling]") {
    const Region a = example1_ellipse();
    const RandomizedRegion r = randomized_shift_scale(a, 3, 42);
    CHECK(r.lambda >= 1.0);
    CHECK(r.lambda < 2.0);
    for (double u : r.shift) {
        CHECK(u >= 0.0);
        CHECK(u < 8.0);
    }
    CHECK(r.region.volume() == Approx(r.lambda * r.lambda * a.volume()));
    CHECK(r.region.contains(r.shift));
    const RandomizedRegion again = randomized_shift_scale(a, 3, 42);
    CHECK(again.lambda == r.lambda);
    CHECK(again.shift == r.shift);
    CHECK_THROWS_AS(randomized_shift_scale(a, 0, 1), InvalidArgument);

    // Unit square: mean table entropy over draws matches log V + n h⊖ + n/2.
    McParams mc;
    mc.samples = 400'000;
    const Estimate pred = prop2_prediction(unit_cube_region(2), mc);
    const RandomizedEntropy re = randomized_table_entropy(unit_cube_region(2), 10, 300, 5);
    INFO("prediction " << pred.value << ", measured " << re.mean_upper << " ± " << re.se_upper);
    CHECK(std::abs(re.mean_upper - pred.value) <= 4 * re.se_upper + pred.radius);
    CHECK(prop2_prediction(unit_cube_region(2), mc, false).value == Approx(pred.value - 1.0));
}

TEST_CASE("bounds report", "[scaling]") {
    McParams mc;
    mc.samples = 50'000;
    const BoundsReport r = bounds_report(example1_ellipse(), 9, mc);
    CHECK(r.has_thm1);
    CHECK(r.has_thm2);
    CHECK_FALSE(r.has_thm3);
    CHECK(r.h_measured.upper <= r.thm2.truncated.h_bound);
    const auto j = r.to_json();
    CHECK(j.contains("thm1"));
    CHECK(j["I_D"]["value"].get<double>() == Approx(0.416).margin(1e-3));

    const BoundsReport g = bounds_report(Region::hypograph(example2_gaussian()), 6, mc);
    CHECK(g.has_thm3);
    CHECK(g.thm3.h_bound == Approx(bound_thm3(2, -0.5 * std::log2(0.75)).h_bound));

    const BoundsReport one = bounds_report(unit_cube_region(1), 4, mc);
    CHECK_FALSE(one.skipped.empty());
    CHECK(one.to_json().contains("skipped"));
}
