#pragma once

// Arithmetic-coding generation and simulation of W (the interval descent over
// the dyadic tree). Both sides run the same routine `descend`, driven by a
// BitSource: the generator feeds fresh fair bits, an agent replays a codeword.
//
// Fixed-point scheme: coordinates are relative to the current bit interval,
// which is always [0, ONE) with ONE = 2^62. Each bit b maps every boundary c
// to 2c - b*ONE, which is exact in 128-bit integers. A slot [s0, s1) is split
// among its children at s0 + floor((s1 - s0) * F_i), where F_i is the
// cumulative child mass fraction rounded down to 64 bits; boundaries whose
// fraction reaches 1 (and the last one) are s1 itself. Child masses come from
// the region's deterministic clipped_volume, so generator and agents agree bit
// for bit.
//
// Unbounded regions are tiled by unit cells: the integer part floor(X) of a
// uniform point is sent first (encode_integer_part), then the descent runs
// inside that cell.

#include <unordered_map>

#include "dsim/bitstring.hpp"
#include "dsim/dyadic.hpp"

namespace dsim {

struct ArithmeticSession {
    BitString bits;
    DyadicCube cube;
    std::size_t integer_bits = 0;   // leading bits carrying the integer part (tiled mode)
    std::uint64_t resamples = 0;    // depth or overflow restarts
};

class ArithmeticCoder {
public:
    using i128 = __int128;
    static constexpr i128 kOne = i128{1} << 62;
    static constexpr i128 kLimit = i128{1} << 124;

    /// `tiled` defaults to true exactly for unbounded regions.
    explicit ArithmeticCoder(Region r, int k_max = 40, std::optional<bool> tiled = std::nullopt)
        : region_(std::move(r)), k_max_(k_max), tiled_(tiled.value_or(!region_.is_bounded())) {
        if (!tiled_) roots_ = root_cubes(region_);
    }

    const Region& region() const { return region_; }
    bool tiled() const { return tiled_; }
    int k_max() const { return k_max_; }

    /// Generation algorithm: emits fair bits until the descent resolves a
    /// decomposition cube. Depth or overflow events restart the session.
    ArithmeticSession generate(Rng& rng) {
        ArithmeticSession s;
        for (;;) {
            BitString prefix;
            std::vector<DyadicCube> roots;
            if (tiled_) {
                const Vec x = sample_uniform(region_, rng);
                IVec z(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) z[i] = static_cast<std::int64_t>(std::floor(x[i]));
                prefix = encode_integer_part(z);
                roots = {DyadicCube{0, z}};
            }
            RandomBitSource src(rng);
            Outcome o = descend(tiled_ ? roots : roots_, src);
            if (o.status != Status::Ok) {
                ++s.resamples;
                continue;
            }
            s.integer_bits = prefix.size();
            s.bits = std::move(prefix);
            s.bits.append(src.drawn());
            s.cube = std::move(o.cube);
            return s;
        }
    }

    /// Simulation algorithm, common part: replays a codeword to the cube.
    /// `consumed` receives the number of bits read (codewords self-delimit).
    DyadicCube replay(BitSource& in) {
        std::vector<DyadicCube> roots;
        if (tiled_) roots = {DyadicCube{0, decode_integer_part(in, region_.dim())}};
        Outcome o = descend(tiled_ ? roots : roots_, in);
        if (o.status == Status::Depth) throw DepthExceeded(k_max_);
        if (o.status == Status::Overflow) throw Error("fixed-point overflow during replay");
        return o.cube;
    }

    DyadicCube replay(const BitString& bits, std::size_t* consumed = nullptr) {
        BitReader r(bits);
        DyadicCube c = replay(r);
        if (consumed) *consumed = r.position();
        return c;
    }

    /// Agent output: coordinate `axis` uniform on the cube's side.
    static double agent_coordinate(const DyadicCube& c, std::size_t axis, Rng& rng) {
        const double lo = std::ldexp(static_cast<double>(c.v[axis]), -c.k);
        return lo + std::ldexp(rng.uniform(), -c.k);
    }

    std::size_t cache_size() const { return cache_.size(); }
    void clear_cache() { cache_.clear(); }

private:
    enum class Status { Ok, Depth, Overflow };
    struct Outcome {
        Status status = Status::Ok;
        DyadicCube cube;
    };
    struct CubeInfo {
        double volume;
        CubeClass cls;
    };

    const CubeInfo& info(const DyadicCube& c) {
        auto it = cache_.find(c);
        if (it != cache_.end()) return it->second;
        if (cache_.size() > (std::size_t{1} << 22)) cache_.clear();
        const Box b = c.box();
        const CubeClass cls = region_.classify(b);
        const double v = cls == CubeClass::Outside ? 0.0 : cls == CubeClass::Inside ? b.volume() : region_.clipped_volume(b).value;
        return cache_.emplace(c, CubeInfo{v, cls}).first->second;
    }

    static i128 scale_floor(i128 width, std::uint64_t f) {
        // floor(width * f / 2^64) for 0 <= width < 2^125.
        const auto w = static_cast<unsigned __int128>(width);
        const std::uint64_t wl = static_cast<std::uint64_t>(w);
        const unsigned __int128 wh = w >> 64;
        const unsigned __int128 lo = (static_cast<unsigned __int128>(wl) * f) >> 64;
        return static_cast<i128>(wh * f + lo);
    }

    /// Splits [s0, s1) by the masses; returns m+1 boundaries.
    static bool split(i128 s0, i128 s1, std::span<const double> mass, std::vector<i128>& bounds) {
        const std::size_t m = mass.size();
        double total = 0.0;
        for (double x : mass) total += x;
        if (!(total > 0.0)) return false;
        bounds.resize(m + 1);
        bounds[0] = s0;
        double cum = 0.0;
        for (std::size_t i = 1; i < m; ++i) {
            cum += mass[i - 1];
            const double frac = std::clamp(cum / total, 0.0, 1.0);
            if (frac >= 1.0) {  // only empty children remain
                bounds[i] = s1;
                continue;
            }
            const double scaled = std::ldexp(frac, 64);
            const std::uint64_t f = scaled >= 0x1.0p64 ? ~std::uint64_t{0} : static_cast<std::uint64_t>(scaled);
            bounds[i] = std::max(bounds[i - 1], s0 + scale_floor(s1 - s0, f));
        }
        bounds[m] = s1;
        return true;
    }

    Outcome descend(const std::vector<DyadicCube>& roots, BitSource& src) {
        std::vector<double> mass;
        std::vector<i128> bounds;
        std::vector<DyadicCube> options = roots;
        i128 s0 = 0, s1 = kOne;
        DyadicCube current;
        bool have_cube = false;
        for (;;) {
            if (have_cube) {
                if (info(current).cls == CubeClass::Inside) return {Status::Ok, current};
                if (current.k >= k_max_) return {Status::Depth, {}};
                const std::uint64_t nchild = std::uint64_t{1} << current.dim();
                options.resize(nchild);
                for (std::uint64_t i = 0; i < nchild; ++i) options[i] = current.child(i);
            }
            if (options.size() == 1) {
                current = options.front();
                have_cube = true;
                continue;
            }
            mass.resize(options.size());
            for (std::size_t i = 0; i < options.size(); ++i) mass[i] = info(options[i]).volume;
            if (!split(s0, s1, mass, bounds)) return {Status::Depth, {}};
            for (;;) {
                std::size_t j = bounds.size();
                for (std::size_t i = 0; i + 1 < bounds.size(); ++i)
                    if (bounds[i] <= 0 && bounds[i + 1] >= kOne && bounds[i + 1] > bounds[i]) {
                        j = i;
                        break;
                    }
                if (j < bounds.size()) {
                    s0 = bounds[j];
                    s1 = bounds[j + 1];
                    current = options[j];
                    have_cube = true;
                    break;
                }
                const int b = src.next();
                for (auto& c : bounds) {
                    c = 2 * c - (b ? kOne : 0);
                    if (c > kLimit || c < -kLimit) return {Status::Overflow, {}};
                }
            }
        }
    }

    Region region_;
    int k_max_;
    bool tiled_;
    std::vector<DyadicCube> roots_;
    std::unordered_map<DyadicCube, CubeInfo, DyadicCubeHash> cache_;
};

}  // namespace dsim
