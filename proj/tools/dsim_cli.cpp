// dsim: command-line front end for decomposition, coding, simulation,
// bounds, the networked protocol demo and the named experiments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dsim/dsim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_out() {
    const char* env = std::getenv("DSIM_OUT_DIR");
    return env && *env ? env : "dsim-out";
}

std::ofstream open_file(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream os(dir / name);
    if (!os) throw dsim::Error("cannot write " + (dir / name).string());
    return os;
}

dsim::Vec parse_point(const std::string& s) {
    dsim::Vec v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            v.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw dsim::InvalidArgument("bad coordinate '" + tok + "' in --point");
        }
    }
    return v;
}

struct Common {
    std::string region = "ellipse-example1";
    int depth = 8;
    std::uint64_t seed = 1;
    std::uint64_t sessions = 1000;
    double eps = 0.0;
    std::string out;
    std::string path = "arithmetic";
};

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_decompose(const Common& c) {
    const dsim::Region r = dsim::resolve_region(c.region);
    const dsim::DecompositionTable t = dsim::decompose(r, c.depth);
    const dsim::TableEntropy te = dsim::table_entropy(t);
    json j = {{"region", c.region}, {"k_max", c.depth},       {"volume", t.volume},
              {"atoms", t.total_count()}, {"residual_mass", t.residual_mass},
              {"H_lower", te.lower}, {"H_upper", te.upper}};
    if (!c.out.empty()) {
        if (t.entries_complete) {
            auto os = open_file(c.out, "table.csv");
            dsim::write_table_csv(os, t);
        }
        auto ls = open_file(c.out, "levels.csv");
        dsim::detail::write_level_counts(ls, t);
        auto ps = open_file(c.out, "pmf.csv");
        dsim::detail::write_pmf(ps, dsim::sorted_pmf(t));
    }
    print(j);
    return 0;
}

int cmd_encode(const Common& c, const std::string& point, const std::string& decode) {
    const dsim::Region r = dsim::resolve_region(c.region);
    const dsim::DecompositionTable t = dsim::decompose(r, c.depth);
    const dsim::PrefixCode code = dsim::build_prefix_code(t, r);
    json j = {{"region", c.region},
              {"k_max", c.depth},
              {"symbols", code.symbol_count()},
              {"expected_length", code.expected_length()},
              {"kraft", code.kraft_sum()},
              {"max_length", code.max_length()}};
    if (!point.empty()) {
        const dsim::Vec x = parse_point(point);
        dsim::require_dim(x.size(), r.dim());
        if (!r.contains(x)) throw dsim::InvalidArgument("--point lies outside the region");
        const dsim::DyadicCube cube = dsim::locate(r, x, c.depth + dsim::Simulator::kLocateExtra);
        j["cube"] = {{"k", cube.k}, {"v", cube.v}};
        j["codeword"] = code.encode(cube).to_string();
    }
    if (!decode.empty()) {
        std::size_t used = 0;
        const dsim::DyadicCube cube = code.decode(dsim::BitString::from_string(decode), &used);
        j["decoded"] = {{"k", cube.k}, {"v", cube.v}, {"bits_used", used}};
    }
    if (!c.out.empty()) {
        auto os = open_file(c.out, "code.csv");
        os << "symbol,k,v,probability,length,codeword\n";
        for (std::size_t s = 0; s < code.symbol_count(); ++s) {
            os << s << ',';
            if (s == code.escape_symbol()) {
                os << "escape,";
            } else {
                const auto& cb = code.cube(s);
                os << cb.k << ",\"";
                for (std::size_t i = 0; i < cb.v.size(); ++i) os << (i ? " " : "") << cb.v[i];
                os << '"';
            }
            os << ',' << std::setprecision(17) << code.probability(s) << ',' << code.length(s) << ','
               << code.codeword(s).to_string() << '\n';
        }
    }
    print(j);
    return 0;
}

int cmd_simulate(const Common& c) {
    const dsim::Region r = dsim::resolve_region(c.region);
    const dsim::CodePath path = c.eps > 0 ? dsim::CodePath::FixedLength : dsim::parse_code_path(c.path);
    std::ofstream tr;
    if (!c.out.empty()) tr = open_file(c.out, "transcripts.jsonl");
    long double bits = 0;
    std::uint64_t resamples = 0, escaped = 0;
    json j = {{"region", c.region}, {"path", dsim::to_string(path)}, {"k_max", c.depth}, {"sessions", c.sessions}, {"seed", c.seed}};
    auto record = [&](const dsim::SessionTranscript& t) {
        bits += t.codeword.size();
        resamples += t.resamples;
        escaped += t.escaped;
        if (tr.is_open()) tr << t.to_json().dump() << '\n';
    };
    if (path == dsim::CodePath::FixedLength) {
        dsim::require(c.eps < 1, "--eps must lie in (0, 1)");
        const dsim::DecompositionTable t = dsim::decompose(r, c.depth);
        const dsim::TruncatedSimulator sim(r, t, c.eps, dsim::table_entropy(t).upper, c.region);
        for (std::uint64_t s = 0; s < c.sessions; ++s) record(sim.run(dsim::session_seed(c.seed, s)));
        j["plan"] = sim.plan().to_json();
    } else {
        dsim::Simulator sim(r, path, c.depth, c.region);
        for (std::uint64_t s = 0; s < c.sessions; ++s) record(sim.run(dsim::session_seed(c.seed, s)));
    }
    j["mean_length"] = c.sessions ? static_cast<double>(bits / c.sessions) : 0.0;
    j["resamples"] = resamples;
    j["escaped"] = escaped;
    print(j);
    return 0;
}

int cmd_bounds(const Common& c, std::uint64_t mc_samples) {
    const dsim::Region r = dsim::resolve_region(c.region);
    const dsim::BoundsReport b = dsim::bounds_report(r, c.depth, {mc_samples, c.seed, 0.997, 0});
    json j = b.to_json();
    j["region"] = c.region;
    j["k_max"] = c.depth;
    if (!c.out.empty()) {
        auto os = open_file(c.out, "bounds.json");
        os << j.dump(2) << '\n';
    }
    print(j);
    return 0;
}

int cmd_protocol(const Common& c, const std::string& config, const std::string& transport, const std::string& mode,
                 std::size_t agents, bool sessions_set, bool depth_set, bool seed_set) {
    dsim::ProtocolConfig cfg;
    if (!config.empty()) {
        std::ifstream in(config);
        if (!in) throw dsim::InvalidArgument("cannot open config " + config);
        cfg = dsim::parse_protocol_config(in);
    } else {
        cfg.region = dsim::resolve_region(c.region);
        cfg.region_id = c.region;
        cfg.path = dsim::parse_code_path(c.path);
    }
    // Flags given explicitly override the file.
    if (!transport.empty()) {
        if (transport == "inproc") cfg.transport = dsim::Transport::InProcess;
        else if (transport == "socket") cfg.transport = dsim::Transport::Socket;
        else throw dsim::InvalidArgument("unknown transport '" + transport + "'");
    }
    if (!mode.empty()) {
        if (mode == "framed") cfg.mode = dsim::StreamMode::Framed;
        else if (mode == "stream") cfg.mode = dsim::StreamMode::SharedStream;
        else throw dsim::InvalidArgument("unknown mode '" + mode + "'");
    }
    if (agents) cfg.agents = agents;
    if (sessions_set) cfg.sessions = c.sessions;
    if (depth_set) cfg.k_max = c.depth;
    if (seed_set) cfg.seed = c.seed;
    if (!c.out.empty() && cfg.transcript.empty()) {
        fs::create_directories(c.out);
        cfg.transcript = (fs::path(c.out) / "protocol.jsonl").string();
    }
    const dsim::ProtocolReport rep = dsim::protocol_demo(cfg);
    print(rep.to_json());
    return rep.disagreements == 0 && rep.bytes_exact ? 0 : 1;
}

int cmd_experiment(const Common& c, const std::string& which, bool sessions_set, bool depth_set, bool seed_set,
                   std::uint64_t draws) {
    dsim::ExperimentManifest m;
    const auto& names = dsim::experiment_names();
    if (std::find(names.begin(), names.end(), which) != names.end()) {
        m.name = which;
    } else {
        m = dsim::ExperimentManifest::load(which);
    }
    m.out_dir = c.out.empty() ? (m.out_dir == "." ? default_out() : m.out_dir) : c.out;
    if (sessions_set) m.sessions = c.sessions;
    if (depth_set) m.k_max = c.depth;
    if (seed_set) m.seed = c.seed;
    if (c.eps > 0) m.eps = {c.eps};
    if (draws) m.draws = draws;
    const json j = dsim::run_experiment(m);
    std::cout << j.dump(2) << '\n';
    std::cerr << "wrote " << (fs::path(m.out_dir) / m.name).string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed simulation of continuous random variables via dyadic decomposition"};
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* s, bool sim_flags) {
        s->add_option("--region", c.region, "fixture name or region JSON file")->capture_default_str();
        s->add_option("--depth", c.depth, "maximum dyadic level k_max")->capture_default_str();
        s->add_option("--seed", c.seed, "master seed")->capture_default_str();
        s->add_option("--out", c.out, "output directory (default $DSIM_OUT_DIR)");
        if (sim_flags) {
            s->add_option("--sessions", c.sessions, "number of sessions")->capture_default_str();
            s->add_option("--path", c.path, "code path: arithmetic | prefix")->capture_default_str();
        }
    };

    auto* dec = app.add_subcommand("decompose", "dyadic decomposition table and entropy");
    add_common(dec, false);

    auto* enc = app.add_subcommand("encode", "prefix code over the decomposition");
    add_common(enc, false);
    std::string point, decode;
    enc->add_option("--point", point, "comma-separated point to locate and encode");
    enc->add_option("--decode", decode, "bit string to decode");

    auto* sim = app.add_subcommand("simulate", "run generator/agent sessions");
    add_common(sim, true);
    sim->add_option("--eps", c.eps, "use the truncated fixed-length code with this TV target");

    auto* bnd = app.add_subcommand("bounds", "dual total correlation, erosion entropy and entropy bounds");
    add_common(bnd, false);
    std::uint64_t mc_samples = 200'000;
    bnd->add_option("--mc", mc_samples, "Monte Carlo samples")->capture_default_str();

    auto* proto = app.add_subcommand("protocol-demo", "generator, agents and collector over byte channels");
    add_common(proto, true);
    std::string config, transport, mode;
    std::size_t agents = 0;
    proto->add_option("--config", config, "key = value configuration file");
    proto->add_option("--transport", transport, "inproc | socket");
    proto->add_option("--mode", mode, "framed | stream");
    proto->add_option("--agents", agents, "agent count (default: one per coordinate)");

    auto* exp = app.add_subcommand("experiment", "run a named experiment or a manifest file");
    add_common(exp, true);
    exp->add_option("--eps", c.eps, "single epsilon for thm4-truncation");
    std::string which;
    std::uint64_t draws = 0;
    exp->add_option("name", which, "experiment name or manifest path")->required();
    exp->add_option("--draws", draws, "randomized shift/scale draws");

    CLI11_PARSE(app, argc, argv);

    // Decompose/encode/bounds write files only when --out or DSIM_OUT_DIR is set.
    const bool out_given = !c.out.empty();
    if (!out_given && std::getenv("DSIM_OUT_DIR")) c.out = default_out();
    try {
        if (*dec) return cmd_decompose(c);
        if (*enc) return cmd_encode(c, point, decode);
        if (*sim) return cmd_simulate(c);
        if (*bnd) return cmd_bounds(c, mc_samples);
        auto given = [](CLI::App* s, const char* o) { return s->get_option(o)->count() > 0; };
        if (*proto)
            return cmd_protocol(c, config, transport, mode, agents, given(proto, "--sessions"), given(proto, "--depth"),
                                given(proto, "--seed"));
        if (*exp) {
            if (!out_given) c.out.clear();  // the manifest's own "out" comes before the environment
            return cmd_experiment(c, which, given(exp, "--sessions"), given(exp, "--depth"), given(exp, "--seed"), draws);
        }
    } catch (const dsim::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
