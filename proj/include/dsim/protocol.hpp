#pragma once

// Multi-party demo of the simulation protocol. A source emits codewords over
// ordered byte streams, one per agent; each agent decodes on its own and
// reports (session, cube, coordinate) to a collector, which checks that all
// agents recovered the same cube and assembles the joint samples.
//
// Wire format, source -> agent:
//   framed mode: one frame per session (4-byte big-endian bit length, MSB-first payload);
//   stream mode: the concatenated codewords cut into frames of at most
//                kStreamChunk bits; agents self-delimit sessions.
// Agent -> collector: fixed-size little-endian records
//   u64 session | i32 k | n_full x i64 v | f64 x
// followed after the last session by a u64 trailer: bytes the agent read.
//
// Transports: in-process byte pipes with agent threads, or AF_UNIX socket
// pairs with one forked process per agent.

#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>

#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "dsim/region_io.hpp"
#include "dsim/simulate.hpp"

namespace dsim {

enum class Transport { InProcess, Socket };
enum class StreamMode { Framed, SharedStream };

struct ProtocolConfig {
    Region region;
    std::string region_id = "region";
    std::size_t agents = 0;  // 0: the region's agent count
    Transport transport = Transport::InProcess;
    StreamMode mode = StreamMode::Framed;
    CodePath path = CodePath::Arithmetic;
    std::uint64_t sessions = 1000;
    std::uint64_t seed = 1;
    int k_max = 12;
    std::string transcript;  // JSON-lines output path, empty for none
};

/// Textual key = value configuration; '#' starts a comment. Keys: region
/// (fixture name or JSON file), agents, transport (inproc|socket), mode
/// (framed|stream), path (arithmetic|prefix), sessions, seed, k_max, transcript.
inline ProtocolConfig parse_protocol_config(std::istream& in) {
    ProtocolConfig c;
    bool have_region = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (key == "region") {
            c.region = resolve_region(val);
            c.region_id = val;
            have_region = true;
        } else if (key == "agents") {
            c.agents = std::stoul(val);
        } else if (key == "transport") {
            if (val == "inproc") c.transport = Transport::InProcess;
            else if (val == "socket") c.transport = Transport::Socket;
            else throw InvalidArgument("unknown transport '" + val + "'");
        } else if (key == "mode") {
            if (val == "framed") c.mode = StreamMode::Framed;
            else if (val == "stream") c.mode = StreamMode::SharedStream;
            else throw InvalidArgument("unknown mode '" + val + "'");
        } else if (key == "path") {
            c.path = parse_code_path(val);
        } else if (key == "sessions") {
            c.sessions = std::stoull(val);
        } else if (key == "seed") {
            c.seed = std::stoull(val);
        } else if (key == "k_max") {
            c.k_max = std::stoi(val);
        } else if (key == "transcript") {
            c.transcript = val;
        } else {
            throw InvalidArgument("unknown config key '" + key + "'");
        }
    }
    if (!have_region) throw InvalidArgument("config names no region");
    return c;
}

// --- byte channels ---

class ByteChannel {
public:
    virtual ~ByteChannel() = default;
    virtual void write(const std::uint8_t* data, std::size_t n) = 0;
    /// False on end of stream before n bytes.
    virtual bool read_exact(std::uint8_t* data, std::size_t n) = 0;
    virtual void close_write() = 0;
};

/// Unbounded in-process pipe.
class MemoryPipe : public ByteChannel {
public:
    void write(const std::uint8_t* data, std::size_t n) override {
        {
            std::lock_guard lk(mu_);
            buf_.insert(buf_.end(), data, data + n);
        }
        cv_.notify_all();
    }
    bool read_exact(std::uint8_t* data, std::size_t n) override {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return buf_.size() >= n || closed_; });
        if (buf_.size() < n) return false;
        std::copy(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n), data);
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
        return true;
    }
    void close_write() override {
        {
            std::lock_guard lk(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::uint8_t> buf_;
    bool closed_ = false;
};

/// One end of a stream socket.
class SocketChannel : public ByteChannel {
public:
    explicit SocketChannel(int fd) : fd_(fd) {}
    ~SocketChannel() override {
        if (fd_ >= 0) ::close(fd_);
    }
    SocketChannel(const SocketChannel&) = delete;
    SocketChannel& operator=(const SocketChannel&) = delete;

    void write(const std::uint8_t* data, std::size_t n) override {
        while (n > 0) {
            const ssize_t w = ::send(fd_, data, n, MSG_NOSIGNAL);
            if (w < 0 && errno == EINTR) continue;
            if (w <= 0) throw Error(std::string("socket write failed: ") + std::strerror(errno));
            data += w;
            n -= static_cast<std::size_t>(w);
        }
    }
    bool read_exact(std::uint8_t* data, std::size_t n) override {
        while (n > 0) {
            const ssize_t r = ::read(fd_, data, n);
            if (r < 0 && errno == EINTR) continue;
            if (r < 0) throw Error(std::string("socket read failed: ") + std::strerror(errno));
            if (r == 0) return false;
            data += r;
            n -= static_cast<std::size_t>(r);
        }
        return true;
    }
    void close_write() override { ::shutdown(fd_, SHUT_WR); }
    void close() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_;
};

/// Counts bytes passing through another channel.
class CountingChannel : public ByteChannel {
public:
    explicit CountingChannel(ByteChannel& inner) : inner_(inner) {}
    void write(const std::uint8_t* d, std::size_t n) override {
        inner_.write(d, n);
        written += n;
    }
    bool read_exact(std::uint8_t* d, std::size_t n) override {
        const bool ok = inner_.read_exact(d, n);
        if (ok) read += n;
        return ok;
    }
    void close_write() override { inner_.close_write(); }
    std::uint64_t written = 0, read = 0;

private:
    ByteChannel& inner_;
};

inline void write_frame(ByteChannel& ch, const BitString& b) {
    const auto f = b.serialize();
    ch.write(f.data(), f.size());
}

inline std::optional<BitString> read_frame(ByteChannel& ch) {
    std::uint8_t hdr[4];
    if (!ch.read_exact(hdr, 4)) return std::nullopt;
    const std::uint32_t n = (std::uint32_t{hdr[0]} << 24) | (std::uint32_t{hdr[1]} << 16) | (std::uint32_t{hdr[2]} << 8) | hdr[3];
    std::vector<std::uint8_t> buf(4 + (std::size_t{n} + 7) / 8);
    std::copy(hdr, hdr + 4, buf.begin());
    if (!ch.read_exact(buf.data() + 4, buf.size() - 4)) throw Error("stream ended inside a frame");
    return BitString::deserialize(buf);
}

/// Bits of a framed stream, pulled one frame at a time.
class FrameStreamSource : public BitSource {
public:
    explicit FrameStreamSource(ByteChannel& ch) : ch_(ch) {}
    int next() override {
        while (pos_ >= cur_.size()) {
            auto f = read_frame(ch_);
            if (!f) throw BitsExhausted();
            cur_ = std::move(*f);
            pos_ = 0;
        }
        return cur_[pos_++];
    }

private:
    ByteChannel& ch_;
    BitString cur_;
    std::size_t pos_ = 0;
};

inline constexpr std::size_t kStreamChunk = 4096;

struct AgentRecord {
    std::uint64_t session = 0;
    DyadicCube cube;
    double x = 0.0;
};

namespace detail {

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
}

template <class T>
T get_le(const std::uint8_t*& p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    return v;
}

inline std::size_t record_size(std::size_t n_full) { return 8 + 4 + 8 * n_full + 8; }

/// Agent loop: decode each session's codeword and report.
inline void agent_main(Simulator sim, std::size_t agent, ByteChannel& in, ByteChannel& out, const ProtocolConfig& cfg) {
    CountingChannel counted(in);
    FrameStreamSource stream(counted);
    std::vector<std::uint8_t> rec;
    for (std::uint64_t s = 0; s < cfg.sessions; ++s) {
        DyadicCube c;
        if (cfg.mode == StreamMode::Framed) {
            auto f = read_frame(counted);
            if (!f) throw Error("source stream ended early");
            c = sim.decode(*f);
        } else {
            c = sim.decode(stream);
        }
        const double x = Simulator::agent_output(c, agent, session_seed(cfg.seed, s));
        rec.clear();
        put_le<std::uint64_t>(rec, s);
        put_le<std::int32_t>(rec, c.k);
        for (auto v : c.v) put_le<std::int64_t>(rec, v);
        put_le<double>(rec, x);
        out.write(rec.data(), rec.size());
    }
    rec.clear();
    put_le<std::uint64_t>(rec, counted.read);
    out.write(rec.data(), rec.size());
    out.close_write();
}

}  // namespace detail

struct ProtocolReport {
    std::uint64_t sessions = 0;
    std::size_t agents = 0;
    std::uint64_t disagreements = 0;
    std::uint64_t codeword_bits = 0;
    std::vector<std::uint64_t> bytes_sent;      // per agent, counted by the source
    std::vector<std::uint64_t> bytes_received;  // per agent, counted by the agent
    std::uint64_t bytes_expected = 0;           // per agent, from the framing arithmetic
    bool bytes_exact = false;
    BitBias stream_bias;                        // over all codeword bits
    std::vector<SessionTranscript> transcripts;

    nlohmann::json to_json() const {
        return {{"sessions", sessions},         {"agents", agents},
                {"disagreements", disagreements}, {"codeword_bits", codeword_bits},
                {"bytes_sent", bytes_sent},     {"bytes_received", bytes_received},
                {"bytes_expected", bytes_expected}, {"bytes_exact", bytes_exact},
                {"ones", stream_bias.ones},     {"bit_bias_z", stream_bias.z}};
    }
};

/// Runs the demo end to end.
inline ProtocolReport protocol_demo(const ProtocolConfig& cfg) {
    const std::size_t n_agents = cfg.agents ? cfg.agents : agent_count(cfg.region);
    require(n_agents >= 1 && n_agents <= agent_count(cfg.region), "agent count exceeds the region's output dimension");
    const std::size_t n_full = cfg.region.dim();
    Simulator proto(cfg.region, cfg.path, cfg.k_max, cfg.region_id);

    // Per agent: a downlink (source -> agent) and an uplink (agent -> collector).
    std::vector<std::unique_ptr<ByteChannel>> down_src, down_agent, up_agent, up_col;
    std::vector<pid_t> children;
    std::vector<std::thread> agent_threads;
    std::vector<std::exception_ptr> agent_err(n_agents);
    if (cfg.transport == Transport::InProcess) {
        for (std::size_t i = 0; i < n_agents; ++i) {
            auto d = std::make_shared<MemoryPipe>();
            auto u = std::make_shared<MemoryPipe>();
            struct Ref : ByteChannel {
                std::shared_ptr<MemoryPipe> p;
                explicit Ref(std::shared_ptr<MemoryPipe> q) : p(std::move(q)) {}
                void write(const std::uint8_t* a, std::size_t n) override { p->write(a, n); }
                bool read_exact(std::uint8_t* a, std::size_t n) override { return p->read_exact(a, n); }
                void close_write() override { p->close_write(); }
            };
            down_src.push_back(std::make_unique<Ref>(d));
            down_agent.push_back(std::make_unique<Ref>(d));
            up_agent.push_back(std::make_unique<Ref>(u));
            up_col.push_back(std::make_unique<Ref>(u));
        }
        for (std::size_t i = 0; i < n_agents; ++i)
            agent_threads.emplace_back([&, i] {
                try {
                    detail::agent_main(proto, i, *down_agent[i], *up_agent[i], cfg);
                } catch (...) {
                    agent_err[i] = std::current_exception();
                    up_agent[i]->close_write();
                }
            });
    } else {
        // One socket pair per agent carries both directions.
        std::vector<int> parent_fd, child_fd;
        for (std::size_t i = 0; i < n_agents; ++i) {
            int sv[2];
            if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0) throw Error("socketpair failed");
            parent_fd.push_back(sv[0]);
            child_fd.push_back(sv[1]);
        }
        for (std::size_t i = 0; i < n_agents; ++i) {
            const pid_t pid = ::fork();
            if (pid < 0) throw Error("fork failed");
            if (pid == 0) {
                for (int fd : parent_fd) ::close(fd);
                for (std::size_t j = 0; j < n_agents; ++j)
                    if (j != i) ::close(child_fd[j]);
                int code = 0;
                try {
                    SocketChannel ch(child_fd[i]);
                    detail::agent_main(proto, i, ch, ch, cfg);
                } catch (...) {
                    code = 1;
                }
                ::_exit(code);
            }
            children.push_back(pid);
        }
        for (int fd : child_fd) ::close(fd);
        for (std::size_t i = 0; i < n_agents; ++i) {
            auto ch = std::make_shared<SocketChannel>(parent_fd[i]);
            struct Ref : ByteChannel {
                std::shared_ptr<SocketChannel> p;
                explicit Ref(std::shared_ptr<SocketChannel> q) : p(std::move(q)) {}
                void write(const std::uint8_t* a, std::size_t n) override { p->write(a, n); }
                bool read_exact(std::uint8_t* a, std::size_t n) override { return p->read_exact(a, n); }
                void close_write() override { p->close_write(); }
            };
            down_src.push_back(std::make_unique<Ref>(ch));
            up_col.push_back(std::make_unique<Ref>(ch));
        }
    }

    ProtocolReport rep;
    rep.sessions = cfg.sessions;
    rep.agents = n_agents;
    rep.transcripts.resize(cfg.sessions);
    rep.bytes_sent.assign(n_agents, 0);
    std::vector<std::uint8_t> stream_bits;

    // Source thread.
    std::exception_ptr src_err;
    std::thread source([&] {
        try {
            Simulator gen = proto;
            std::vector<CountingChannel> out;
            out.reserve(n_agents);
            for (auto& d : down_src) out.emplace_back(*d);
            BitString pending;
            auto flush = [&](bool all) {
                while (pending.size() >= kStreamChunk || (all && !pending.empty())) {
                    BitString chunk, rest;
                    const std::size_t take = std::min(kStreamChunk, pending.size());
                    for (std::size_t i = 0; i < pending.size(); ++i) (i < take ? chunk : rest).push_back(pending[i]);
                    for (auto& o : out) write_frame(o, chunk);
                    rep.bytes_expected += BitString::framed_size(chunk.size());
                    pending = std::move(rest);
                }
            };
            for (std::uint64_t s = 0; s < cfg.sessions; ++s) {
                SessionTranscript t = gen.generate(session_seed(cfg.seed, s));
                rep.codeword_bits += t.codeword.size();
                for (std::size_t i = 0; i < t.codeword.size(); ++i) stream_bits.push_back(static_cast<std::uint8_t>(t.codeword[i]));
                if (cfg.mode == StreamMode::Framed) {
                    for (auto& o : out) write_frame(o, t.codeword);
                    rep.bytes_expected += BitString::framed_size(t.codeword.size());
                } else {
                    pending.append(t.codeword);
                    flush(false);
                }
                rep.transcripts[s] = std::move(t);
            }
            flush(true);
            for (std::size_t i = 0; i < n_agents; ++i) {
                rep.bytes_sent[i] = out[i].written;
                out[i].close_write();
            }
        } catch (...) {
            src_err = std::current_exception();
            for (auto& d : down_src) d->close_write();
        }
    });

    // Collector.
    std::vector<std::vector<AgentRecord>> got(n_agents);
    rep.bytes_received.assign(n_agents, 0);
    std::string collector_error;
    std::vector<std::uint8_t> buf(detail::record_size(n_full));
    for (std::uint64_t s = 0; s < cfg.sessions && collector_error.empty(); ++s)
        for (std::size_t i = 0; i < n_agents; ++i) {
            if (!up_col[i]->read_exact(buf.data(), buf.size())) {
                collector_error = "agent " + std::to_string(i) + " stream ended at session " + std::to_string(s);
                break;
            }
            const std::uint8_t* p = buf.data();
            AgentRecord r;
            r.session = detail::get_le<std::uint64_t>(p);
            r.cube.k = detail::get_le<std::int32_t>(p);
            r.cube.v.resize(n_full);
            for (auto& v : r.cube.v) v = detail::get_le<std::int64_t>(p);
            r.x = detail::get_le<double>(p);
            got[i].push_back(std::move(r));
        }
    if (collector_error.empty())
        for (std::size_t i = 0; i < n_agents; ++i) {
            std::uint8_t t[8];
            if (!up_col[i]->read_exact(t, 8)) {
                collector_error = "agent " + std::to_string(i) + " sent no trailer";
                break;
            }
            const std::uint8_t* p = t;
            rep.bytes_received[i] = detail::get_le<std::uint64_t>(p);
        }
    source.join();
    for (auto& th : agent_threads) th.join();
    int child_failures = 0;
    for (pid_t pid : children) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++child_failures;
    }
    if (src_err) std::rethrow_exception(src_err);
    for (auto& e : agent_err)
        if (e) std::rethrow_exception(e);
    if (child_failures) throw Error(std::to_string(child_failures) + " agent process(es) failed");
    if (!collector_error.empty()) throw Error("transport failure: " + collector_error);

    for (std::uint64_t s = 0; s < cfg.sessions; ++s) {
        SessionTranscript& t = rep.transcripts[s];
        bool agree = true;
        for (std::size_t i = 0; i < n_agents; ++i) {
            const AgentRecord& r = got[i][s];
            agree = agree && r.session == s && r.cube == t.cube;
            t.outputs.push_back(r.x);
        }
        if (!agree) ++rep.disagreements;
    }
    rep.bytes_exact = true;
    for (std::size_t i = 0; i < n_agents; ++i)
        rep.bytes_exact = rep.bytes_exact && rep.bytes_sent[i] == rep.bytes_expected && rep.bytes_received[i] == rep.bytes_expected;
    rep.stream_bias = bit_bias(stream_bits);
    if (!cfg.transcript.empty()) {
        std::ofstream os(cfg.transcript);
        if (!os) throw Error("cannot write transcript " + cfg.transcript);
        for (const auto& t : rep.transcripts) os << t.to_json().dump() << '\n';
    }
    return rep;
}

}  // namespace dsim
