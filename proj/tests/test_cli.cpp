#include <filesystem>
#include <sstream>

#include "test_common.hpp"

namespace fs = std::filesystem;

namespace {

std::string fixtures() {
    const char* d = std::getenv("DSIM_FIXTURES");
    return d ? d : "fixtures";
}

ProtocolConfig config(const std::string& text) {
    std::istringstream in(text);
    return parse_protocol_config(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("dsim-test-" + std::to_string(::getpid()) + "-" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("protocol config parsing", "[cli]") {
    const ProtocolConfig c = config(
        "# demo\n"
        "region = l-shape   # inline comment\n"
        "\n"
        "transport = socket\n"
        "mode = stream\n"
        "path = prefix\n"
        "sessions = 77\n"
        "seed = 9\n"
        "k_max = 5\n"
        "agents = 1\n");
    CHECK(c.region_id == "l-shape");
    CHECK(c.region.dim() == 2);
    CHECK(c.transport == Transport::Socket);
    CHECK(c.mode == StreamMode::SharedStream);
    CHECK(c.path == CodePath::PrefixCode);
    CHECK(c.sessions == 77);
    CHECK(c.seed == 9);
    CHECK(c.k_max == 5);
    CHECK(c.agents == 1);

    std::ifstream f(fixtures() + "/protocol-socket.conf");
    REQUIRE(f);
    const ProtocolConfig fc = parse_protocol_config(f);
    CHECK(fc.sessions == 10000);
    CHECK(fc.transport == Transport::Socket);

    CHECK_THROWS_AS(config("sessions = 3\n"), InvalidArgument);
    CHECK_THROWS_AS(config("region = l-shape\ncolour = blue\n"), InvalidArgument);
    CHECK_THROWS_AS(config("region = l-shape\njust words\n"), InvalidArgument);
    CHECK_THROWS_AS(config("region = l-shape\ntransport = pigeon\n"), InvalidArgument);
    CHECK_THROWS_AS(config("region = nowhere\n"), InvalidArgument);
}

TEST_CASE("region files resolve", "[cli]") {
    const Region r = resolve_region(fixtures() + "/regions/ellipse-example1.json");
    CHECK(r.volume() == Approx(example1_ellipse().volume()).epsilon(1e-12));
    const Region g = resolve_region(fixtures() + "/regions/gauss-example2.json");
    CHECK(g.is_hypograph());
    CHECK(dual_total_correlation(g.density()).value == Approx(-0.5 * std::log2(0.75)));
}

TEST_CASE("protocol demo", "[cli]") {
    for (const char* transport : {"inproc", "socket"})
        for (const char* mode : {"framed", "stream"})
            for (const char* path : {"arithmetic", "prefix"}) {
                INFO(transport << ' ' << mode << ' ' << path);
                ProtocolConfig c = config(std::string("region = ellipse-example1\nsessions = 150\nk_max = 9\n") +
                                          "transport = " + transport + "\nmode = " + mode + "\npath = " + path + "\n");
                const ProtocolReport r = protocol_demo(c);
                CHECK(r.sessions == 150);
                CHECK(r.agents == 2);
                CHECK(r.disagreements == 0);
                CHECK(r.bytes_exact);
                CHECK(r.bytes_sent == r.bytes_received);
                REQUIRE(r.transcripts.size() == 150);
                // The collector's samples match a local replay of the same seeds.
                Simulator local(c.region, c.path, c.k_max);
                for (std::uint64_t s = 0; s < 150; s += 37) {
                    const SessionTranscript t = local.run(session_seed(c.seed, s));
                    CHECK(r.transcripts[s].cube == t.cube);
                    CHECK(r.transcripts[s].outputs == t.outputs);
                }
            }

    ProtocolConfig one = config("region = gauss-example2\nagents = 1\nsessions = 50\nk_max = 8\n");
    const ProtocolReport r1 = protocol_demo(one);
    CHECK(r1.agents == 1);
    CHECK(r1.disagreements == 0);
    CHECK_THROWS_AS(protocol_demo(config("region = l-shape\nagents = 3\n")), InvalidArgument);
}

TEST_CASE("experiments are reproducible", "[cli]") {
    ExperimentManifest m = ExperimentManifest::load(fixtures() + "/experiments/l-shape.json");
    CHECK(m.name == "l-shape");
    m.sessions = 4000;
    const fs::path a = scratch("a"), b = scratch("b");
    m.out_dir = a.string();
    const auto ja = run_experiment(m);
    m.out_dir = b.string();
    const auto jb = run_experiment(m);
    CHECK(ja == jb);
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++files;
        const fs::path other = b / fs::relative(e.path(), a);
        INFO(other);
        REQUIRE(fs::exists(other));
        CHECK(slurp(e.path()) == slurp(other));
    }
    CHECK(files >= 2);
    CHECK(ja["prefix"]["expected_length"].get<double>() == Approx(5.0 / 3.0));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("manifest errors", "[cli]") {
    CHECK(experiment_names().size() == 6);
    for (const auto& n : experiment_names()) CHECK(fs::exists(fixtures() + "/experiments/" + n + ".json"));
    CHECK_THROWS_AS(ExperimentManifest::load("/nonexistent/manifest.json"), InvalidArgument);
    const fs::path d = scratch("bad");
    {
        std::ofstream(d / "broken.json") << "{ \"name\": ";
        std::ofstream(d / "noname.json") << "{ \"region\": \"l-shape\" }";
    }
    CHECK_THROWS_AS(ExperimentManifest::load((d / "broken.json").string()), InvalidArgument);
    CHECK_THROWS_AS(ExperimentManifest::load((d / "noname.json").string()), InvalidArgument);
    ExperimentManifest m;
    m.name = "no-such-experiment";
    CHECK_THROWS_AS(run_experiment(m), InvalidArgument);
    fs::remove_all(d);
}
