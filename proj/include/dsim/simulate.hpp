#pragma once

// One-shot distributed simulation sessions. A generator draws the common
// randomness W as a codeword; every agent decodes W on its own and outputs
// its coordinate uniformly on the cube side with private randomness.
//
// Seeds: session s uses derive_seed(seed, s); within it the generator draws
// from stream 0 and agent i from stream i + 1.

#include <sstream>

#include "json.hpp"

#include "dsim/arithmetic.hpp"
#include "dsim/prefix_code.hpp"
#include "dsim/stats.hpp"

namespace dsim {

enum class CodePath { PrefixCode, Arithmetic, FixedLength };

inline const char* to_string(CodePath p) {
    switch (p) {
        case CodePath::PrefixCode: return "prefix";
        case CodePath::Arithmetic: return "arithmetic";
        case CodePath::FixedLength: return "fixed";
    }
    return "?";
}

inline CodePath parse_code_path(std::string_view s) {
    if (s == "prefix") return CodePath::PrefixCode;
    if (s == "arithmetic") return CodePath::Arithmetic;
    if (s == "fixed") return CodePath::FixedLength;
    throw InvalidArgument("unknown code path '" + std::string(s) + "'");
}

struct SessionTranscript {
    std::string region_id;
    CodePath path = CodePath::Arithmetic;
    BitString codeword;
    DyadicCube cube;
    Vec outputs;                 // one coordinate per agent
    std::uint64_t seed = 0;      // session seed
    std::uint64_t resamples = 0; // generator restarts (depth, boundary)
    bool escaped = false;        // prefix path: the cube was sent after Escape

    nlohmann::json to_json() const {
        return {{"region", region_id}, {"path", to_string(path)}, {"codeword", codeword.to_string()},
                {"k", cube.k},         {"v", cube.v},             {"x", outputs},
                {"seed", seed},        {"resamples", resamples},  {"escaped", escaped}};
    }
};

inline std::uint64_t session_seed(std::uint64_t seed, std::uint64_t session) { return derive_seed(seed, session); }
inline std::uint64_t agent_seed(std::uint64_t session_seed, std::size_t agent) { return derive_seed(session_seed, agent + 1); }
inline std::uint64_t generator_seed(std::uint64_t session_seed) { return derive_seed(session_seed, 0); }

/// Number of agents: the region's dimension, one less for hypographs (the
/// auxiliary height coordinate is simulated and dropped).
inline std::size_t agent_count(const Region& r) { return r.is_hypograph() ? r.dim() - 1 : r.dim(); }

/// Draws a uniform point and locates its cube, searching `extra` levels below
/// k_max. Points on a dyadic boundary or deeper than that restart the draw.
inline DyadicCube draw_cube(const Region& r, int k_max, int extra, Rng& rng, std::uint64_t& resamples) {
    for (;;) {
        const Vec x = sample_uniform(r, rng);
        try {
            return locate(r, x, k_max + extra);
        } catch (const DepthExceeded&) {
        } catch (const InvalidArgument&) {
        }
        ++resamples;
    }
}

/// Exact simulation over one region with a fixed code path. Holds the coder
/// state (decomposition table and prefix code, or arithmetic volume cache).
class Simulator {
public:
    Simulator(Region r, CodePath path, int k_max, std::string region_id = "region")
        : region_(std::move(r)), path_(path), k_max_(k_max), id_(std::move(region_id)) {
        require(path != CodePath::FixedLength, "use TruncatedSimulator for fixed-length codes");
        if (path_ == CodePath::PrefixCode) {
            table_ = decompose(region_, k_max_);
            if (!table_->entries_complete)
                throw InvalidArgument("prefix table exceeds the entry cap at depth " + std::to_string(k_max_) +
                                      "; lower the depth or use the arithmetic path");
            code_ = build_prefix_code(*table_, region_);
        } else {
            arith_.emplace(region_, k_max_ + kLocateExtra);
        }
    }

    static constexpr int kLocateExtra = 24;

    const Region& region() const { return region_; }
    CodePath path() const { return path_; }
    std::size_t agents() const { return agent_count(region_); }
    const DecompositionTable* table() const { return table_ ? &*table_ : nullptr; }
    const PrefixCode* code() const { return code_ ? &*code_ : nullptr; }

    /// Generator side: the codeword and cube of one session.
    SessionTranscript generate(std::uint64_t sseed) {
        SessionTranscript t;
        t.region_id = id_;
        t.path = path_;
        t.seed = sseed;
        Rng rng(generator_seed(sseed));
        if (path_ == CodePath::PrefixCode) {
            t.cube = draw_cube(region_, k_max_, kLocateExtra, rng, t.resamples);
            t.escaped = code_->symbol_of(t.cube) == PrefixCode::npos;
            t.codeword = code_->encode(t.cube);
        } else {
            ArithmeticSession s = arith_->generate(rng);
            t.cube = std::move(s.cube);
            t.codeword = std::move(s.bits);
            t.resamples = s.resamples;
        }
        return t;
    }

    /// Agent side: decodes the codeword read from `in`.
    DyadicCube decode(BitSource& in) {
        if (path_ == CodePath::PrefixCode) return code_->decode(in);
        return arith_->replay(in);
    }

    DyadicCube decode(const BitString& bits) {
        BitReader r(bits);
        DyadicCube c = decode(r);
        if (!r.at_end()) throw Error("trailing bits after codeword");
        return c;
    }

    /// Agent i's output given the decoded cube.
    static double agent_output(const DyadicCube& c, std::size_t agent, std::uint64_t sseed) {
        Rng rng(agent_seed(sseed, agent));
        return ArithmeticCoder::agent_coordinate(c, agent, rng);
    }

    /// A full session: every agent decodes independently; a disagreement with
    /// the generator's cube is a hard failure.
    SessionTranscript run(std::uint64_t sseed) {
        SessionTranscript t = generate(sseed);
        for (std::size_t i = 0; i < agents(); ++i) {
            const DyadicCube c = decode(t.codeword);
            if (!(c == t.cube)) throw Error("agent " + std::to_string(i) + " decoded a different cube");
            t.outputs.push_back(agent_output(c, i, sseed));
        }
        return t;
    }

private:
    Region region_;
    CodePath path_;
    int k_max_;
    std::string id_;
    std::optional<DecompositionTable> table_;
    std::optional<PrefixCode> code_;
    std::optional<ArithmeticCoder> arith_;
};

/// One exact session on a fresh simulator.
inline SessionTranscript run_exact(const Region& r, CodePath path, std::uint64_t seed, int k_max = 12) {
    Simulator sim(r, path, k_max);
    return sim.run(session_seed(seed, 0));
}

// --- fixed-length truncated scheme ---

/// ⌈log2(ε 2^{H/ε} + 1)⌉, evaluated in log space.
inline int thm4_code_length(double h, double eps) {
    require(eps > 0 && eps < 1, "epsilon must lie in (0, 1)");
    const double a = std::log2(eps) + h / eps;
    const double v = a > 60 ? a + std::exp2(-a) * kLog2E : std::log2(std::exp2(a) + 1);
    return static_cast<int>(std::ceil(v - 1e-12));
}

/// ⌈n⁻¹(ε⁻¹H - log V)⌉.
inline int thm4_cutoff(double h, double eps, std::size_t n, double volume) {
    return static_cast<int>(std::ceil((h / eps - std::log2(volume)) / static_cast<double>(n) - 1e-12));
}

struct TruncationPlan {
    double eps = 0.0;
    double h = 0.0;           // H(W) estimate driving the plan
    int l = 0;                // cutoff level from the formula
    int l_used = 0;           // min(l, k_max + 1): the table holds no deeper level
    int n_bits = 0;           // code length N
    DyadicCube replacement;   // receives all mass at levels >= l_used
    std::size_t cardinality = 0;  // |W̃|
    double moved_mass = 0.0;  // P(K >= l_used), the exact TV of the scheme
    bool degenerate = false;  // cutoff at or above the coarsest level
    bool cardinality_ok() const { return n_bits >= 64 || cardinality <= (std::uint64_t{1} << n_bits); }

    nlohmann::json to_json() const {
        return {{"eps", eps},
                {"H", h},
                {"l", l},
                {"l_used", l_used},
                {"N", n_bits},
                {"replacement", {{"k", replacement.k}, {"v", replacement.v}}},
                {"cardinality", cardinality},
                {"moved_mass", moved_mass},
                {"degenerate", degenerate},
                {"cardinality_ok", cardinality_ok()}};
    }
};

/// Fixed-length simulation of W̃: cubes below the cutoff keep their code, the
/// rest map to the replacement (the most probable entry). Each codeword is
/// an N-bit index into the truncated table.
class TruncatedSimulator {
public:
    TruncatedSimulator(Region r, const DecompositionTable& t, double eps, double h, std::string region_id = "region")
        : region_(std::move(r)), id_(std::move(region_id)) {
        require(t.entries_complete && t.entry_count() > 0, "truncation needs a table with explicit entries");
        plan_.eps = eps;
        plan_.h = h;
        plan_.l = thm4_cutoff(h, eps, t.n, t.volume);
        plan_.n_bits = thm4_code_length(h, eps);
        plan_.l_used = std::min(plan_.l, t.k_max + 1);
        std::size_t best = 0;
        for (std::size_t i = 1; i < t.entry_count(); ++i)
            if (t.probability(i) > t.probability(best)) best = i;
        plan_.replacement = t.entry(best);
        if (plan_.l_used <= plan_.replacement.k) {
            plan_.degenerate = true;
            plan_.l_used = plan_.replacement.k + 1;
            table_ = t;
            table_.entry_level = {plan_.replacement.k};
            table_.entry_coords = plan_.replacement.v;
            table_.entry_prob = {1.0};
            table_.residual_mass = 0;
            plan_.moved_mass = 1.0 - t.probability(best);
        } else {
            table_ = plan_.l_used > t.k_max ? t : truncate_table(t, plan_.l_used, plan_.replacement);
            plan_.moved_mass = t.residual_after(plan_.l_used - 1);
        }
        // Residual below k_max is folded into the replacement as well.
        if (plan_.l_used > t.k_max && plan_.moved_mass > 0 && !plan_.degenerate) table_ = truncate_with_residual(t);
        plan_.cardinality = table_.entry_count();
        for (std::size_t i = 0; i < table_.entry_count(); ++i) index_.emplace(table_.entry(i), i);
    }

    const TruncationPlan& plan() const { return plan_; }
    const DecompositionTable& table() const { return table_; }
    std::size_t agents() const { return agent_count(region_); }

    BitString encode(std::size_t index) const {
        BitString b;
        for (int i = plan_.n_bits - 1; i >= 0; --i) b.push_back(i < 64 && ((index >> i) & 1U));
        return b;
    }

    DyadicCube decode(BitSource& in) const {
        std::uint64_t idx = 0;
        bool high = false;  // bits above 63 are padding zeros
        for (int i = plan_.n_bits - 1; i >= 0; --i) {
            const int b = in.next();
            if (i >= 64) high = high || b;
            else idx = (idx << 1) | static_cast<std::uint64_t>(b);
        }
        if (high || idx >= table_.entry_count()) throw Error("fixed-length index out of range");
        return table_.entry(idx);
    }

    SessionTranscript run(std::uint64_t sseed) const {
        SessionTranscript t;
        t.region_id = id_;
        t.path = CodePath::FixedLength;
        t.seed = sseed;
        Rng rng(generator_seed(sseed));
        DyadicCube c;
        for (;;) {
            const Vec x = sample_uniform(region_, rng);
            try {
                c = locate(region_, x, plan_.l_used - 1);
            } catch (const DepthExceeded&) {
                c = plan_.replacement;
            } catch (const InvalidArgument&) {
                ++t.resamples;
                continue;
            }
            break;
        }
        auto it = index_.find(c);
        if (it == index_.end()) c = plan_.replacement, it = index_.find(c);
        t.cube = c;
        t.codeword = encode(it->second);
        for (std::size_t i = 0; i < agents(); ++i) {
            BitReader r(t.codeword);
            const DyadicCube d = decode(r);
            if (!(d == t.cube)) throw Error("agent decoded a different cube");
            t.outputs.push_back(Simulator::agent_output(d, i, sseed));
        }
        return t;
    }

private:
    DecompositionTable truncate_with_residual(const DecompositionTable& t) const {
        DecompositionTable out = truncate_table(t, t.k_max + 1, plan_.replacement);
        if (out.entry_prob.empty()) {
            std::vector<double> p(out.entry_count());
            for (std::size_t i = 0; i < p.size(); ++i) p[i] = out.probability(i);
            out.entry_prob = std::move(p);
        }
        for (std::size_t i = 0; i < out.entry_count(); ++i)
            if (out.entry(i) == plan_.replacement) out.entry_prob[i] += t.residual_mass;
        out.residual_mass = 0;
        return out;
    }

    Region region_;
    std::string id_;
    TruncationPlan plan_;
    DecompositionTable table_;
    std::unordered_map<DyadicCube, std::size_t, DyadicCubeHash> index_;
};

inline std::vector<CubeSample> cube_samples(std::span<const SessionTranscript> ts) {
    std::vector<CubeSample> out;
    out.reserve(ts.size());
    for (const auto& t : ts) {
        DyadicCube c = t.cube;
        // Hypograph cubes carry the height axis; the outputs cover the rest.
        if (c.v.size() > t.outputs.size()) c.v.resize(t.outputs.size());
        out.push_back({std::move(c), t.outputs});
    }
    return out;
}

}  // namespace dsim
