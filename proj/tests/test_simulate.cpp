#include "test_common.hpp"

TEST_CASE("unit square sessions send nothing", "[simulate]") {
    for (CodePath p : {CodePath::PrefixCode, CodePath::Arithmetic}) {
        const SessionTranscript t = run_exact(unit_cube_region(2), p, 3, 6);
        CHECK(t.codeword.empty());
        CHECK(t.cube == DyadicCube{0, {0, 0}});
        REQUIRE(t.outputs.size() == 2);
        CHECK(unit_cube_region(2).contains(t.outputs));
    }
    CHECK_THROWS_AS(Simulator(unit_cube_region(2), CodePath::FixedLength, 4), InvalidArgument);
}

TEST_CASE("L-shape sessions", "[simulate]") {
    for (CodePath p : {CodePath::PrefixCode, CodePath::Arithmetic}) {
        INFO(to_string(p));
        Simulator sim(l_shape(), p, 5);
        const int n = 30'000;
        std::map<DyadicCube, int> freq;
        double arm = 0;
        for (int s = 0; s < n; ++s) {
            const SessionTranscript t = sim.run(session_seed(11, s));
            ++freq[t.cube];
            REQUIRE(l_shape().contains(t.outputs));
            REQUIRE(t.cube.contains_half_open(t.outputs));
            arm += t.outputs[0] >= 1.0;
        }
        CHECK(freq.size() == 3);
        for (const auto& [c, k] : freq) CHECK(std::abs(k - n / 3.0) < 4 * std::sqrt(n * 2.0 / 9.0));
        CHECK(std::abs(arm / n - 1.0 / 3.0) < 4 * std::sqrt(2.0 / 9.0 / n));
    }
    // Huffman on three equal cubes: lengths 1, 2, 2.
    Simulator pre(l_shape(), CodePath::PrefixCode, 5);
    CHECK(pre.code()->expected_length() == Approx(5.0 / 3.0));
}

TEST_CASE("sessions are reproducible and agents agree", "[simulate]") {
    const Region e = example1_ellipse();
    Simulator a(e, CodePath::Arithmetic, 12), b(e, CodePath::Arithmetic, 12);
    for (int s = 0; s < 200; ++s) {
        const SessionTranscript x = a.run(session_seed(4, s));
        const SessionTranscript y = b.run(session_seed(4, s));
        CHECK(x.codeword == y.codeword);
        CHECK(x.outputs == y.outputs);
        CHECK(b.decode(x.codeword) == x.cube);
    }
    CHECK_THROWS_AS(b.decode(BitString::from_string("0101010101010101010101010101011")), Error);
}

TEST_CASE("prefix path escapes below the table depth", "[simulate]") {
    const Region e = example1_ellipse();
    Simulator sim(e, CodePath::PrefixCode, 4, "ellipse");
    int escaped = 0;
    for (int s = 0; s < 3000; ++s) {
        const SessionTranscript t = sim.run(session_seed(6, s));
        escaped += t.escaped;
        if (t.escaped) CHECK(t.cube.k > 4);
        CHECK(e.classify(t.cube) == CubeClass::Inside);
    }
    // Mass below level 4 is the table's residual.
    const double p = sim.table()->residual_mass;
    CHECK(std::abs(escaped - 3000 * p) < 4 * std::sqrt(3000 * p * (1 - p)) + 1);
}

TEST_CASE("ellipse outputs are uniform", "[simulate]") {
    const Region e = example1_ellipse();
    Simulator sim(e, CodePath::Arithmetic, 12);
    const int n = 40'000;
    double s0 = 0, s1 = 0, q = 0;
    for (int s = 0; s < n; ++s) {
        const SessionTranscript t = sim.run(session_seed(2, s));
        REQUIRE(e.contains(t.outputs));
        s0 += t.outputs[0];
        s1 += t.outputs[1];
        q += t.outputs[0] * t.outputs[0];
    }
    // E[X0²] for a uniform ellipse: Σ / (n + 2) with Σ = K⁻¹, so (1/4)·1 = 0.25.
    CHECK(std::abs(s0 / n) < 4 * std::sqrt(0.25 / n));
    CHECK(std::abs(s1 / n) < 4 * std::sqrt(0.25 / n));
    CHECK(q / n == Approx(0.25).margin(0.01));
}

TEST_CASE("Gaussian hypograph sessions", "[simulate]") {
    Simulator sim(Region::hypograph(example2_gaussian()), CodePath::Arithmetic, 10, "gauss");
    CHECK(sim.agents() == 2);
    const int n = 20'000;
    double s = 0, q = 0, c = 0;
    for (int i = 0; i < n; ++i) {
        const SessionTranscript t = sim.run(session_seed(8, i));
        REQUIRE(t.outputs.size() == 2);
        s += t.outputs[0];
        q += t.outputs[0] * t.outputs[0];
        c += t.outputs[0] * t.outputs[1];
    }
    CHECK(std::abs(s / n) < 4 * std::sqrt(0.125 / n));
    CHECK(q / n == Approx(0.125).margin(0.01));
    CHECK(c / n == Approx(0.0625).margin(0.01));
}

TEST_CASE("fixed-length code length and cutoff", "[simulate]") {
    // log(0.1) + 10 log 3 = 12.53 -> 13.
    CHECK(thm4_code_length(std::log2(3.0), 0.1) == 13);
    CHECK(thm4_code_length(1.585, 0.1) == 13);
    CHECK(thm4_code_length(0.0, 0.5) == 1);  // log(1/2 + 1) rounds up to 1
    CHECK(thm4_code_length(40.0, 0.1) == static_cast<int>(std::ceil(std::log2(0.1) + 400)));
    CHECK(thm4_cutoff(std::log2(3.0), 0.1, 2, 3.0) == 8);
    CHECK_THROWS_AS(thm4_code_length(1.0, 0.0), InvalidArgument);
}

TEST_CASE("truncated simulator", "[simulate]") {
    SECTION("L-shape keeps all mass") {
        const DecompositionTable t = decompose(l_shape(), 4);
        const TruncatedSimulator ts(l_shape(), t, 0.1, std::log2(3.0));
        CHECK(ts.plan().moved_mass == 0.0);
        CHECK(ts.plan().n_bits == 13);
        CHECK(ts.plan().cardinality == 3);
        CHECK(ts.plan().cardinality_ok());
        for (std::size_t i = 0; i < 3; ++i) {
            const BitString w = ts.encode(i);
            BitReader r(w);
            CHECK(ts.decode(r) == ts.table().entry(i));
        }
        const BitString seven = BitString::from_string("0000000000111");
        BitReader bad(seven);
        CHECK_THROWS_AS(ts.decode(bad), Error);
        for (int s = 0; s < 100; ++s) {
            const SessionTranscript tr = ts.run(session_seed(1, s));
            CHECK(tr.codeword.size() == 13);
            CHECK(l_shape().contains(tr.outputs));
        }
    }
    SECTION("ellipse moves at most ε") {
        const Region e = example1_ellipse();
        const DecompositionTable t = decompose(e, 9);
        const double h = table_entropy(t).upper;
        const TruncatedSimulator ts(e, t, 0.3, h);
        INFO(ts.plan().to_json().dump());
        CHECK(ts.plan().moved_mass <= 0.3);
        CHECK(ts.plan().cardinality_ok());
        double mass = 0;
        for (std::size_t i = 0; i < ts.table().entry_count(); ++i) mass += ts.table().probability(i);
        CHECK(mass == Approx(1.0).epsilon(1e-9));
        // The replacement's observed frequency includes the moved mass.
        const int n = 5000;
        int rep = 0;
        for (int s = 0; s < n; ++s) {
            const SessionTranscript tr = ts.run(session_seed(3, s));
            CHECK(static_cast<int>(tr.codeword.size()) == ts.plan().n_bits);
            rep += tr.cube == ts.plan().replacement;
        }
        double p = ts.plan().moved_mass;
        for (std::size_t i = 0; i < t.entry_count(); ++i)
            if (t.entry(i) == ts.plan().replacement) p += t.probability(i);
        CHECK(std::abs(rep - n * p) < 4 * std::sqrt(n * p * (1 - p)) + 1);
    }
}

TEST_CASE("transcript JSON and cube samples", "[simulate]") {
    Simulator sim(Region::hypograph(example2_gaussian()), CodePath::Arithmetic, 8, "gauss");
    const SessionTranscript t = sim.run(session_seed(5, 0));
    const auto j = t.to_json();
    CHECK(j["region"] == "gauss");
    CHECK(j["path"] == "arithmetic");
    CHECK(j["codeword"].get<std::string>() == t.codeword.to_string());
    CHECK(j["x"].size() == 2);
    CHECK(j["v"].size() == 3);

    const std::vector<SessionTranscript> ts{t};
    const auto cs = cube_samples(ts);
    CHECK(cs[0].cube.v.size() == 2);
    CHECK(parse_code_path("prefix") == CodePath::PrefixCode);
    CHECK_THROWS_AS(parse_code_path("morse"), InvalidArgument);
}
