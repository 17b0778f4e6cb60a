#pragma once

// Named experiments. Each reads a manifest, writes CSV/JSON artifacts into
// the output directory and returns its JSON summary. Outputs depend only on
// the manifest, so two runs produce identical bytes.

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "dsim/protocol.hpp"
#include "dsim/region_io.hpp"
#include "dsim/scaling.hpp"
#include "dsim/simulate.hpp"
#include "dsim/stats.hpp"

namespace dsim {

struct ExperimentManifest {
    std::string name;
    std::string region;   // fixture name or region file; empty: experiment default
    int k_max = -1;       // -1: experiment default
    std::uint64_t seed = 1;
    std::uint64_t sessions = 0;  // 0: experiment default
    std::vector<double> eps;
    std::uint64_t mc_samples = 200'000;
    std::size_t draws = 200;     // randomized draws (shift/scale experiments)
    std::string out_dir = ".";

    static ExperimentManifest from_json(const nlohmann::json& j) {
        ExperimentManifest m;
        try {
            m.name = j.at("name").get<std::string>();
            m.region = j.value("region", std::string{});
            m.k_max = j.value("k_max", -1);
            m.seed = j.value("seed", std::uint64_t{1});
            m.sessions = j.value("sessions", std::uint64_t{0});
            m.eps = j.value("eps", std::vector<double>{});
            m.mc_samples = j.value("mc_samples", std::uint64_t{200'000});
            m.draws = j.value("draws", std::size_t{200});
            m.out_dir = j.value("out", std::string{"."});
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument(std::string("manifest: ") + e.what());
        }
        return m;
    }

    static ExperimentManifest load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InvalidArgument("cannot open manifest " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument("manifest " + path + ": " + e.what());
        }
        return from_json(j);
    }

    McParams mc() const { return {mc_samples, seed, 0.997, 0}; }
};

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"l-shape",       "ellipse-example1", "gauss-example2", "fig4-sweep",
                                                   "thm4-truncation", "props-suite"};
    return names;
}

namespace detail {

inline std::filesystem::path out_path(const ExperimentManifest& m, const std::string& file) {
    std::filesystem::path dir = std::filesystem::path(m.out_dir) / m.name;
    std::filesystem::create_directories(dir);
    return dir / file;
}

inline std::ofstream open_out(const ExperimentManifest& m, const std::string& file) {
    std::ofstream os(out_path(m, file));
    if (!os) throw Error("cannot write " + out_path(m, file).string());
    return os;
}

inline void write_summary(const ExperimentManifest& m, const nlohmann::json& j) {
    auto os = open_out(m, "summary.json");
    os << j.dump(2) << '\n';
}

inline nlohmann::json estimate_json(const Estimate& e) {
    return {{"value", e.value}, {"radius", e.radius}, {"method", to_string(e.method)}, {"samples", e.samples}, {"seed", e.seed}};
}

inline nlohmann::json entropy_json(const TableEntropy& t) {
    return {{"lower", t.lower}, {"upper", t.upper}, {"estimate", t.estimate}, {"rho", t.rho}};
}

inline void write_level_counts(std::ostream& os, const DecompositionTable& t) {
    os << "k,count,probability_each\n";
    for (int k = t.k_root; k <= t.k_max; ++k)
        os << k << ',' << t.count_at(k) << ',' << std::setprecision(17) << t.level_probability(k) << '\n';
}

inline void write_pmf(std::ostream& os, std::span<const double> pmf) {
    os << "rank,probability\n";
    for (std::size_t i = 0; i < pmf.size(); ++i) os << i + 1 << ',' << std::setprecision(17) << pmf[i] << '\n';
}

inline nlohmann::json tail_json(const TailFit& f) {
    return {{"alpha", f.alpha}, {"r2", f.r2}, {"first_rank", f.first_rank}, {"last_rank", f.last_rank}, {"atoms", f.atoms}};
}

inline nlohmann::json chi_json(const ChiSquareResult& c) {
    return {{"statistic", c.statistic}, {"df", c.df}, {"p_value", c.p_value}, {"groups", c.groups}, {"merged_cells", c.merged_cells}};
}

inline nlohmann::json tv_json(const TvEstimate& t) {
    return {{"value", t.value}, {"radius", t.radius}, {"noise_floor", t.noise_floor}, {"cells", t.cells}};
}

inline Region region_or(const ExperimentManifest& m, const char* fallback) {
    return resolve_region(m.region.empty() ? std::string(fallback) : m.region);
}

}  // namespace detail

// --- l-shape: exact pmf, sessions on both code paths ---

inline nlohmann::json experiment_l_shape(const ExperimentManifest& m) {
    const Region r = detail::region_or(m, "l-shape");
    const int k_max = m.k_max >= 0 ? m.k_max : 6;
    const std::uint64_t sessions = m.sessions ? m.sessions : 300'000;
    const DecompositionTable t = decompose(r, k_max);
    const TableEntropy te = table_entropy(t);
    nlohmann::json j;
    j["H"] = detail::entropy_json(te);
    j["log3"] = std::log2(3.0);
    j["entries"] = t.entry_count();
    {
        auto os = detail::open_out(m, "table.csv");
        write_table_csv(os, t);
    }
    for (CodePath path : {CodePath::PrefixCode, CodePath::Arithmetic}) {
        Simulator sim(r, path, k_max, "l-shape");
        std::vector<SessionTranscript> ts;
        ts.reserve(sessions);
        for (std::uint64_t s = 0; s < sessions; ++s) ts.push_back(sim.run(session_seed(m.seed, s)));
        std::map<DyadicCube, std::uint64_t> freq;
        std::vector<Vec> xs;
        long double bits = 0;
        for (const auto& tr : ts) {
            ++freq[tr.cube];
            xs.push_back(tr.outputs);
            bits += tr.codeword.size();
        }
        nlohmann::json p;
        nlohmann::json cubes = nlohmann::json::array();
        double max_z = 0;
        for (std::size_t e = 0; e < t.entry_count(); ++e) {
            const double pe = t.probability(e);
            const double cnt = static_cast<double>(freq[t.entry(e)]);
            const double z = (cnt - pe * sessions) / std::sqrt(sessions * pe * (1 - pe));
            max_z = std::max(max_z, std::abs(z));
            cubes.push_back({{"k", t.entry(e).k}, {"v", t.entry(e).v}, {"probability", pe}, {"count", cnt}, {"z", z}});
        }
        p["cubes"] = cubes;
        p["max_abs_z"] = max_z;
        p["mean_length"] = static_cast<double>(bits / sessions);
        p["chi_square"] = detail::chi_json(chi_square_uniform(xs, r, 16));
        const IndependenceReport ci = conditional_independence_check(cube_samples(ts), 500);
        p["independence_pass"] = ci.pass;
        p["independence_cubes"] = ci.cubes.size();
        if (path == CodePath::PrefixCode) p["expected_length"] = sim.code()->expected_length();
        j[to_string(path)] = p;
    }
    j["sessions"] = sessions;
    detail::write_summary(m, j);
    return j;
}

// --- ellipse Example 1 ---

inline nlohmann::json experiment_ellipse(const ExperimentManifest& m) {
    const Region r = detail::region_or(m, "ellipse-example1");
    const int k_max = m.k_max >= 0 ? m.k_max : 11;
    const std::uint64_t sessions = m.sessions ? m.sessions : 100'000;
    const DecompositionTable t = decompose(r, k_max);
    const TableEntropy te = table_entropy(t);
    const std::vector<double> pmf = sorted_pmf(t);
    {
        auto os = detail::open_out(m, "table.csv");
        write_table_csv(os, t);
        auto ps = detail::open_out(m, "pmf.csv");
        detail::write_pmf(ps, pmf);
        auto ls = detail::open_out(m, "levels.csv");
        detail::write_level_counts(ls, t);
    }
    nlohmann::json j;
    j["k_max"] = k_max;
    j["H"] = detail::entropy_json(te);
    j["residual_mass"] = t.residual_mass;
    j["I_analytic"] = detail::estimate_json(dual_total_correlation(r));
    j["I_mc"] = detail::estimate_json(dual_total_correlation_mc(r, m.mc()));
    j["tail"] = detail::tail_json(tail_exponent(pmf));
    const BoundPair b1 = bound_thm1(r, m.seed);
    const Thm2Report b2 = bound_thm2(r, m.seed);
    j["thm1"] = {{"H", b1.h_bound}, {"G", b1.g_bound}};
    j["thm2"] = {{"truncated", b2.truncated.h_bound}, {"projection", b2.projection.h_bound}, {"G", b2.truncated.g_bound}};
    const Estimate er = erosion_entropy(r, m.mc());
    j["erosion"] = detail::estimate_json(er);
    j["prop2_bound"] = std::log2(r.volume()) + 2 * er.value + 4;

    // The elongated ellipse K = diag(10000, 1).
    const Region el = Region::ellipsoid({{10000.0, 0.0}, {0.0, 1.0}});
    const Thm2Report e2 = bound_thm2(el, m.seed);
    j["elongated"] = {{"I", dual_total_correlation(el).value},
                      {"thm1", bound_thm1(el, m.seed).h_bound},
                      {"thm2_projection", e2.projection.h_bound},
                      {"thm2_truncated", e2.truncated.h_bound},
                      {"thm2_closed_form", thm2_ellipse_closed_form(10000.0, 0.0, 1.0)}};

    // Coders: arithmetic sessions with independent agent decoding, and the prefix code.
    Simulator arith(r, CodePath::Arithmetic, k_max, "ellipse-example1");
    std::uint64_t agree = 0;
    long double bits = 0;
    std::vector<Vec> xs;
    std::vector<std::uint8_t> stream;
    std::map<DyadicCube, std::uint64_t> freq;
    for (std::uint64_t s = 0; s < sessions; ++s) {
        const std::uint64_t ss = session_seed(m.seed, s);
        SessionTranscript tr = arith.generate(ss);
        bool ok = true;
        for (std::size_t i = 0; i < arith.agents(); ++i) {
            const DyadicCube c = arith.decode(tr.codeword);
            ok = ok && c == tr.cube;
            tr.outputs.push_back(Simulator::agent_output(c, i, ss));
        }
        agree += ok;
        bits += tr.codeword.size();
        for (std::size_t i = 0; i < tr.codeword.size(); ++i) stream.push_back(static_cast<std::uint8_t>(tr.codeword[i]));
        ++freq[tr.cube];
        xs.push_back(std::move(tr.outputs));
    }
    const BitBias bias = bit_bias(stream);
    // Cube frequencies against the table over the enumerated cubes (rest pooled).
    GridHistogram dummy(Box({0.0}, {1.0}), std::vector<std::size_t>{t.entry_count()});
    CellMasses cm;
    cm.cell.resize(t.entry_count());
    for (std::size_t e = 0; e < t.entry_count(); ++e) {
        cm.cell[e] = t.probability(e);
        const std::uint64_t c = freq[t.entry(e)];
        for (std::uint64_t q = 0; q < c; ++q) dummy.add(std::array<double, 1>{(e + 0.5) / t.entry_count()});
    }
    cm.outside = t.residual_mass;
    std::uint64_t deep = 0;
    for (auto& [c, n] : freq)
        if (c.k > k_max) deep += n;
    for (std::uint64_t q = 0; q < deep; ++q) dummy.add(std::array<double, 1>{2.0});
    j["arithmetic"] = {{"sessions", sessions},
                       {"agreement", static_cast<double>(agree) / static_cast<double>(sessions)},
                       {"mean_length", static_cast<double>(bits / sessions)},
                       {"bits", stream.size()},
                       {"bit_bias_z", bias.z},
                       {"cube_chi_square", detail::chi_json(chi_square(dummy, cm))},
                       {"sample_chi_square", detail::chi_json(chi_square_uniform(xs, r, 32))}};
    const PrefixCode code = build_prefix_code(t, r);
    j["prefix"] = {{"expected_length", code.expected_length()},
                   {"symbol_entropy", code.symbol_entropy()},
                   {"kraft", code.kraft_sum()},
                   {"max_length", code.max_length()},
                   {"escape_probability", code.has_escape() ? code.probability(code.escape_symbol()) : 0.0}};
    detail::write_summary(m, j);
    return j;
}

// --- Gaussian Example 2 (hypograph) ---

inline nlohmann::json experiment_gauss(const ExperimentManifest& m) {
    const Region r = detail::region_or(m, "gauss-example2");
    require(r.is_hypograph(), "gauss-example2 needs a hypograph region");
    const Density& f = r.density();
    const int k_max = m.k_max >= 0 ? m.k_max : 10;
    const std::uint64_t sessions = m.sessions ? m.sessions : 100'000;
    const DecompositionTable t = decompose(r, k_max, {.store_entries = false});
    const TableEntropy te = table_entropy(t);
    {
        auto ls = detail::open_out(m, "levels.csv");
        detail::write_level_counts(ls, t);
    }
    nlohmann::json j;
    j["k_max"] = k_max;
    j["H"] = detail::entropy_json(te);
    j["atoms"] = t.total_count();
    j["residual_mass"] = t.residual_mass;
    const Estimate id = dual_total_correlation(f);
    j["I_D"] = detail::estimate_json(id);
    j["h"] = f.entropy();
    j["tail"] = detail::tail_json(tail_exponent(sorted_pmf(t)));
    const BoundPair b3 = bound_thm3(f.dim(), id.value);
    j["thm3"] = {{"H", b3.h_bound}, {"G", b3.g_bound}};
    j["lemma3_gap"] = lemma3_gap(f);
    j["lemma4_gap"] = lemma4_gap(f, f.dim() - 1);

    Simulator sim(r, CodePath::Arithmetic, k_max, "gauss-example2");
    std::vector<Vec> xs;
    long double bits = 0;
    for (std::uint64_t s = 0; s < sessions; ++s) {
        SessionTranscript tr = sim.run(session_seed(m.seed, s));
        bits += tr.codeword.size();
        xs.push_back(std::move(tr.outputs));
    }
    Box bounds(Vec(f.dim()), Vec(f.dim()));
    for (std::size_t i = 0; i < f.dim(); ++i) {
        const double s = 3.5 * std::sqrt(f.covariance()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
        bounds.lo[i] = f.mean()[i] - s;
        bounds.hi[i] = f.mean()[i] + s;
    }
    GridHistogram h(bounds, 24);
    for (const auto& x : xs) h.add(x);
    {
        auto hs = detail::open_out(m, "histogram.csv");
        h.write_csv(hs);
    }
    j["sessions"] = sessions;
    j["mean_length"] = static_cast<double>(bits / sessions);
    j["marginal_chi_square"] = detail::chi_json(chi_square(h, cell_masses(h, f)));
    detail::write_summary(m, j);
    return j;
}

// --- correlation sweep of the ellipse family K_t ---

/// K_t = (1 - t²)⁻¹ [[1, -t], [-t, 1]].
inline Region fig4_ellipse(double t) {
    const double c = 1.0 / (1.0 - t * t);
    return Region::ellipsoid({{c, -t * c}, {-t * c, c}});
}

/// H(W) is averaged over the random shift/scale of the randomization
/// proposition, with the same draws for every t, so the curve reflects the
/// shape rather than its placement on the grid.
inline nlohmann::json experiment_fig4(const ExperimentManifest& m) {
    const int k_max = m.k_max >= 0 ? m.k_max : 9;
    const std::size_t draws = m.draws ? m.draws : 128;
    auto os = detail::open_out(m, "fig4.csv");
    os << "t,I,H_lower,H_upper,thm2_bound\n";
    nlohmann::json rows = nlohmann::json::array();
    bool between = true, monotone = true;
    double prev_i = -1e300, prev_h = -1e300, prev_b = -1e300;
    for (int i = 0; i < 10; ++i) {
        const double t = i / 10.0;
        const Region e = fig4_ellipse(t);
        const double id = dual_total_correlation(e).value;
        const RandomizedEntropy re = randomized_table_entropy(e, k_max, draws, m.seed);
        const double b = bound_thm2(e, m.seed).truncated.h_bound;
        os << std::setprecision(10) << t << ',' << id << ',' << re.mean_lower << ',' << re.mean_upper << ',' << b << '\n';
        rows.push_back({{"t", t}, {"I", id}, {"H_lower", re.mean_lower}, {"H_upper", re.mean_upper}, {"H_upper_se", re.se_upper}, {"thm2_bound", b}});
        between = between && id <= re.mean_upper && re.mean_upper <= b;
        monotone = monotone && id >= prev_i && re.mean_upper >= prev_h && b >= prev_b;
        prev_i = id;
        prev_h = re.mean_upper;
        prev_b = b;
    }
    nlohmann::json j = {{"k_max", k_max}, {"draws", draws}, {"rows", rows}, {"between", between}, {"monotone", monotone}};
    detail::write_summary(m, j);
    return j;
}

// --- truncated fixed-length scheme ---

inline nlohmann::json experiment_thm4(const ExperimentManifest& m) {
    const std::vector<double> eps = m.eps.empty() ? std::vector<double>{0.1, 0.05} : m.eps;
    const std::uint64_t sessions = m.sessions ? m.sessions : 100'000;
    auto os = detail::open_out(m, "thm4.csv");
    os << "region,eps,l,l_used,N,cardinality,moved_mass,tv,tv_radius,noise_floor,cardinality_ok\n";
    nlohmann::json rows = nlohmann::json::array();
    struct Case {
        std::string id;
        Region r;
        int k_max;
        std::vector<double> eps;
    };
    std::vector<Case> cases;
    if (m.region.empty()) {
        cases.push_back({"ellipse-example1", example1_ellipse(), 11, eps});
        cases.push_back({"l-shape", l_shape(), 4, {0.1}});
    } else {
        cases.push_back({m.region, resolve_region(m.region), m.k_max >= 0 ? m.k_max : 11, eps});
    }
    for (const auto& c : cases) {
        const DecompositionTable t = decompose(c.r, c.k_max);
        const double h = table_entropy(t).upper;
        for (double e : c.eps) {
            const TruncatedSimulator sim(c.r, t, e, h, c.id);
            GridHistogram hist(c.r.bounding_box(), 16);
            for (std::uint64_t s = 0; s < sessions; ++s) hist.add(sim.run(session_seed(m.seed, s)).outputs);
            const TvEstimate tv = empirical_tv(hist, cell_masses(hist, c.r), m.seed);
            const TruncationPlan& p = sim.plan();
            os << c.id << ',' << e << ',' << p.l << ',' << p.l_used << ',' << p.n_bits << ',' << p.cardinality << ','
               << std::setprecision(10) << p.moved_mass << ',' << tv.value << ',' << tv.radius << ',' << tv.noise_floor << ','
               << (p.cardinality_ok() ? 1 : 0) << '\n';
            nlohmann::json row = p.to_json();
            row["region"] = c.id;
            row["tv"] = detail::tv_json(tv);
            rows.push_back(row);
        }
    }
    nlohmann::json j = {{"sessions", sessions}, {"rows", rows}};
    detail::write_summary(m, j);
    return j;
}

// --- property suite ---

struct PropertyCheck {
    std::string property;
    std::string fixture;
    double lhs = 0.0, rhs = 0.0, tolerance = 0.0;
    std::string relation;  // "<=", "==", ">="
    bool pass = false;
};

inline PropertyCheck make_check(std::string prop, std::string fixture, double lhs, std::string rel, double rhs, double tol) {
    PropertyCheck c{std::move(prop), std::move(fixture), lhs, rhs, tol, std::move(rel), false};
    if (c.relation == "<=") c.pass = lhs <= rhs + tol;
    else if (c.relation == ">=") c.pass = lhs + tol >= rhs;
    else c.pass = std::abs(lhs - rhs) <= tol;
    return c;
}

inline nlohmann::json experiment_props(const ExperimentManifest& m) {
    McParams mc = m.mc();
    std::vector<PropertyCheck> checks;
    auto joint = [](const Estimate& a, const Estimate& b) { return std::hypot(a.radius, b.radius); };
    struct Fixture {
        std::string id;
        Region r;
    };
    const std::vector<Fixture> fixtures = {{"unit-square", unit_cube_region(2)},
                                           {"scaled-square", Region::scaled(unit_cube_region(2), {2.0, 2.0})},
                                           {"ellipse-example1", example1_ellipse()},
                                           {"l-shape", l_shape()},
                                           {"gauss-example2", Region::hypograph(example2_gaussian())}};

    // Anchors.
    const Estimate e01 = erosion_entropy(unit_cube_region(1), mc);
    checks.push_back(make_check("anchor: h_erosion([0,1]) = log e", "unit-interval", e01.value, "==", kLog2E, 0.02));

    // 1. Monotonicity: an axis segment lies in the unit cube.
    for (const auto& f : fixtures) {
        const std::size_t n = f.r.dim();
        const Estimate small = erosion_entropy(f.r, ErosionShape::axis_segment(n, n - 1), mc);
        const Estimate big = erosion_entropy(f.r, ErosionShape::full_cube(n), mc);
        checks.push_back(make_check("1 monotonicity", f.id, small.value, "<=", big.value, joint(small, big)));
    }
    // 2. Scaling: h_{βB}(αA) - h_B(A) = log(β/α).
    {
        const Region a = example1_ellipse();
        const Estimate base = erosion_entropy(a, mc);
        for (auto [alpha, beta] : {std::pair{2.0, 1.0}, std::pair{1.0, 0.5}, std::pair{3.0, 1.5}}) {
            const Estimate s = erosion_entropy(Region::scaled(a, {alpha, alpha}), ErosionShape::full_cube(2, beta), mc);
            checks.push_back(make_check("2 scaling", "ellipse-example1 a=" + std::to_string(alpha).substr(0, 4) + " b=" + std::to_string(beta).substr(0, 4),
                                        s.value - base.value, "==", std::log2(beta / alpha), joint(s, base)));
        }
        const Estimate sq = erosion_entropy(unit_cube_region(2), mc);
        const Estimate sq2 = erosion_entropy(Region::scaled(unit_cube_region(2), {2.0, 2.0}), mc);
        checks.push_back(make_check("2 scaling", "scaled-square", sq2.value - sq.value, "==", -1.0, joint(sq, sq2)));
    }
    // 3. Linear transformation on the ellipse: MA is the ellipse with matrix M^{-T} K M^{-1}.
    {
        Rng rng(derive_seed(m.seed, 77));
        Mat mm(2, 2);
        do {
            for (int i = 0; i < 2; ++i)
                for (int c = 0; c < 2; ++c) mm(i, c) = rng.uniform(-1.5, 1.5);
        } while (std::abs(mm.determinant()) < 0.3);
        const Region a = example1_ellipse();
        const Mat minv = mm.inverse();
        const Mat k2 = minv.transpose() * a.ellipsoid_matrix() * minv;
        const Region ma = Region::ellipsoid({{k2(0, 0), 0.5 * (k2(0, 1) + k2(1, 0))}, {0.5 * (k2(0, 1) + k2(1, 0)), k2(1, 1)}});
        const Estimate lhs = erosion_entropy(ma, ErosionShape::parallelepiped(mm), mc);
        const Estimate rhs = erosion_entropy(a, mc);
        checks.push_back(make_check("3 linear transformation", "ellipse-example1", lhs.value, "==", rhs.value, joint(lhs, rhs)));
    }
    // 4. Union: touching pieces (inequality) and separated pieces (equality).
    {
        const Region a1 = Region::box(Box({0.0, 0.0}, {1.0, 2.0}));
        const Region a2 = Region::box(Box({1.0, 0.0}, {2.0, 1.0}));
        const Region a3 = Region::box(Box({3.0, 0.0}, {4.0, 1.0}));
        const Estimate h1 = erosion_entropy(a1, mc), h2 = erosion_entropy(a2, mc);
        const Estimate hl = erosion_entropy(l_shape(), mc);
        const double w = (2.0 * h1.value + 1.0 * h2.value) / 3.0;
        const double rw = (2.0 * h1.radius + h2.radius) / 3.0;
        checks.push_back(make_check("4 union", "l-shape", hl.value, "<=", w, std::hypot(hl.radius, rw)));
        const Estimate hs = erosion_entropy(Region::disjoint_union({a1, a3}), mc);
        const Estimate h3 = erosion_entropy(a3, mc);
        const double ws = (2.0 * h1.value + h3.value) / 3.0;
        checks.push_back(make_check("4 union (separated)", "two boxes", hs.value, "==", ws,
                                    std::hypot(hs.radius, (2.0 * h1.radius + h3.radius) / 3.0)));
    }
    // 5. Reduction: segment erosion of the hypograph is h(X) + log e.
    {
        const Density g = example2_gaussian();
        const Estimate red = erosion_entropy(Region::hypograph(g), ErosionShape::axis_segment(3, 2), mc);
        checks.push_back(make_check("5 reduction", "gauss-example2", red.value, "==", g.entropy() + kLog2E, std::max(red.radius, 0.05)));
        const Estimate sq = erosion_entropy(unit_cube_region(2), ErosionShape::axis_segment(2, 1), mc);
        checks.push_back(make_check("5 reduction", "unit-square", sq.value, "==", kLog2E, std::max(sq.radius, 0.05)));
    }
    // Randomized mean of H(W) over shift/scale draws (corrected identity, see prop2_prediction).
    nlohmann::json prop2 = nlohmann::json::array();
    for (const auto& f : {fixtures[0], fixtures[3]}) {
        const int k_max = m.k_max >= 0 ? m.k_max : 8;
        const RandomizedEntropy re = randomized_table_entropy(f.r, k_max, m.draws, m.seed);
        const Estimate pred = prop2_prediction(f.r, mc);
        const Estimate uncorrected = prop2_prediction(f.r, mc, false);
        const double sigma = std::hypot(re.se_upper, pred.radius / 3.0);
        checks.push_back(make_check("prop2 randomized mean", f.id, re.mean_upper, "==", pred.value, 3 * sigma));
        prop2.push_back({{"fixture", f.id},
                         {"mean_H_lower", re.mean_lower},
                         {"mean_H_upper", re.mean_upper},
                         {"se", re.se_upper},
                         {"prediction", pred.value},
                         {"prediction_without_half", uncorrected.value},
                         {"draws", re.draws},
                         {"T", re.t}});
    }
    // Lemma 1 on the ellipse: V(A ⊖ [0,γ]^n)/V >= 1 - Σ_i E[min(γ, L_i)/L_i].
    {
        const Region a = example1_ellipse();
        for (double gamma : {0.05, 0.2, 0.5}) {
            const Estimate kept = mc_mean(mc, [&](Rng& rng) {
                const Vec x = sample_uniform(a, rng);
                return max_inscribed_scale(a, x) >= gamma ? 1.0 : 0.0;
            });
            const Estimate lost = mc_mean(mc, [&](Rng& rng) {
                const Vec x = sample_uniform(a, rng);
                double s = 0;
                for (std::size_t i = 0; i < 2; ++i) {
                    const double len = a.section(i, x).length();
                    s += std::min(gamma, len) / len;
                }
                return s;
            });
            checks.push_back(make_check("lemma1", "ellipse gamma=" + std::to_string(gamma).substr(0, 4), kept.value, ">=",
                                        1.0 - lost.value, joint(kept, lost)));
        }
    }
    // Lemmas 3-5 on the Example 2 Gaussian.
    {
        const Density g = example2_gaussian();
        const double n = static_cast<double>(g.dim());
        const double l3 = lemma3_gap(g);
        checks.push_back(make_check("lemma3 gap = (n/2) log e", "gauss-example2", l3, "==", 0.5 * n * kLog2E, 1e-9));
        checks.push_back(make_check("lemma3 gap <= n log e", "gauss-example2", l3, "<=", n * kLog2E, 0.0));
        checks.push_back(make_check("lemma3 gap >= 0", "gauss-example2", l3, ">=", 0.0, 0.0));
        const double l4 = lemma4_gap(g, 1);
        checks.push_back(make_check("lemma4 gap >= 0", "gauss-example2", l4, ">=", 0.0, 0.0));
        checks.push_back(make_check("lemma4 gap <= n log e + log n", "gauss-example2", l4, "<=", n * kLog2E + std::log2(n), 0.0));
        for (double zeta : {0.9, 0.5, 1.0 / 3.0}) {
            for (std::size_t dim : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
                const TruncGapBound tb = logconcave_trunc_gap_bound(dim, zeta);
                // Γ(n+1, ν)/Γ(n+1) by quadrature.
                const double fact = std::tgamma(static_cast<double>(dim) + 1);
                const double upper = quad::integrate([&](double s) { return std::pow(s, static_cast<double>(dim)) * std::exp(-s) / fact; },
                                                     tb.nu, tb.nu + 200.0, 1e-15, 50)
                                         .value;
                checks.push_back(make_check("lemma5 nu solve (relative)", "n=" + std::to_string(dim) + " zeta=" + std::to_string(zeta).substr(0, 5),
                                            upper / zeta, "==", 1.0, 1e-8));
            }
            const TruncatedEntropy tr = truncated_entropy(g, zeta);
            const TruncGapBound tb = logconcave_trunc_gap_bound(g.dim(), zeta);
            checks.push_back(make_check("lemma5 gap bound", "gauss-example2 zeta=" + std::to_string(zeta).substr(0, 5),
                                        tr.h.value - g.entropy(), "<=", tb.bound, 0.0));
        }
    }
    auto os = detail::open_out(m, "props.csv");
    os << "property,fixture,lhs,relation,rhs,tolerance,pass\n";
    nlohmann::json arr = nlohmann::json::array();
    bool all = true;
    for (const auto& c : checks) {
        os << '"' << c.property << "\",\"" << c.fixture << "\"," << std::setprecision(10) << c.lhs << ',' << c.relation << ','
           << c.rhs << ',' << c.tolerance << ',' << (c.pass ? "PASS" : "FAIL") << '\n';
        arr.push_back({{"property", c.property}, {"fixture", c.fixture}, {"lhs", c.lhs}, {"relation", c.relation},
                       {"rhs", c.rhs}, {"tolerance", c.tolerance}, {"pass", c.pass}});
        all = all && c.pass;
    }
    nlohmann::json j = {{"checks", arr}, {"prop2", prop2}, {"all_pass", all}};
    detail::write_summary(m, j);
    return j;
}

inline nlohmann::json run_experiment(const ExperimentManifest& m) {
    if (m.name == "l-shape") return experiment_l_shape(m);
    if (m.name == "ellipse-example1") return experiment_ellipse(m);
    if (m.name == "gauss-example2") return experiment_gauss(m);
    if (m.name == "fig4-sweep") return experiment_fig4(m);
    if (m.name == "thm4-truncation") return experiment_thm4(m);
    if (m.name == "props-suite") return experiment_props(m);
    throw InvalidArgument("unknown experiment '" + m.name + "'");
}

}  // namespace dsim
