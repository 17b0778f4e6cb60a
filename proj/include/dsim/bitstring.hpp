#pragma once

// Bit sequences, the wire framing (4-byte big-endian bit count followed by an
// MSB-first payload, zero padded), bit sources for the coders, and the
// Elias-gamma integer-part code.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dsim/random.hpp"
#include "dsim/types.hpp"

namespace dsim {

class BitsExhausted : public Error {
public:
    BitsExhausted() : Error("bit stream exhausted before decoding finished") {}
};

class BitString {
public:
    BitString() = default;

    static BitString from_string(std::string_view s) {
        BitString b;
        for (char c : s) {
            require(c == '0' || c == '1', "bit strings contain only 0 and 1");
            b.push_back(c == '1');
        }
        return b;
    }

    void push_back(bool bit) { bits_.push_back(bit ? 1 : 0); }
    void append(const BitString& o) { bits_.insert(bits_.end(), o.bits_.begin(), o.bits_.end()); }
    std::size_t size() const { return bits_.size(); }
    bool empty() const { return bits_.empty(); }
    int operator[](std::size_t i) const { return bits_[i]; }
    void clear() { bits_.clear(); }

    bool is_prefix_of(const BitString& o) const {
        return size() <= o.size() && std::equal(bits_.begin(), bits_.end(), o.bits_.begin());
    }

    std::string to_string() const {
        std::string s;
        s.reserve(size());
        for (auto b : bits_) s.push_back(b ? '1' : '0');
        return s;
    }

    /// MSB-first payload bytes, last byte zero padded.
    std::vector<std::uint8_t> payload() const {
        std::vector<std::uint8_t> out((size() + 7) / 8, 0);
        for (std::size_t i = 0; i < size(); ++i)
            if (bits_[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
        return out;
    }

    /// Framed form: 4-byte big-endian bit length then the payload.
    std::vector<std::uint8_t> serialize() const {
        require(size() <= 0xffffffffULL, "bit string too long to frame");
        const auto n = static_cast<std::uint32_t>(size());
        std::vector<std::uint8_t> out = {static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                         static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
        const auto p = payload();
        out.insert(out.end(), p.begin(), p.end());
        return out;
    }

    static std::size_t framed_size(std::size_t bits) { return 4 + (bits + 7) / 8; }

    /// Parses one frame starting at `data`; `consumed` receives the frame size.
    static BitString deserialize(std::span<const std::uint8_t> data, std::size_t* consumed = nullptr) {
        if (data.size() < 4) throw Error("truncated frame header");
        const std::uint32_t n = (std::uint32_t{data[0]} << 24) | (std::uint32_t{data[1]} << 16) |
                                (std::uint32_t{data[2]} << 8) | std::uint32_t{data[3]};
        const std::size_t bytes = (std::size_t{n} + 7) / 8;
        if (data.size() < 4 + bytes) throw Error("truncated frame payload");
        BitString b;
        b.bits_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) b.push_back((data[4 + i / 8] >> (7 - i % 8)) & 1U);
        for (std::size_t i = n; i < bytes * 8; ++i)
            if ((data[4 + i / 8] >> (7 - i % 8)) & 1U) throw Error("nonzero frame padding");
        if (consumed) *consumed = 4 + bytes;
        return b;
    }

    friend bool operator==(const BitString&, const BitString&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// Source of bits for a coder descent.
class BitSource {
public:
    virtual ~BitSource() = default;
    virtual int next() = 0;
};

/// Fresh fair bits from an Rng, recorded as they are drawn.
class RandomBitSource : public BitSource {
public:
    explicit RandomBitSource(Rng& rng) : rng_(rng) {}
    int next() override {
        const int b = rng_.bit();
        drawn_.push_back(b);
        return b;
    }
    const BitString& drawn() const { return drawn_; }

private:
    Rng& rng_;
    BitString drawn_;
};

/// Reads a BitString from a cursor.
class BitReader : public BitSource {
public:
    explicit BitReader(const BitString& bits, std::size_t pos = 0) : bits_(bits), pos_(pos) {}
    int next() override {
        if (pos_ >= bits_.size()) throw BitsExhausted();
        return bits_[pos_++];
    }
    std::size_t position() const { return pos_; }
    bool at_end() const { return pos_ >= bits_.size(); }

private:
    const BitString& bits_;
    std::size_t pos_;
};

/// Elias gamma code of m >= 1: floor(log2 m) zeros, then m in binary.
inline void gamma_encode(std::uint64_t m, BitString& out) {
    require(m >= 1, "gamma code needs a positive integer");
    int len = 63 - __builtin_clzll(m);
    for (int i = 0; i < len; ++i) out.push_back(false);
    for (int i = len; i >= 0; --i) out.push_back((m >> i) & 1U);
}

inline std::uint64_t gamma_decode(BitSource& in) {
    int zeros = 0;
    while (in.next() == 0) {
        if (++zeros > 63) throw Error("malformed gamma code");
    }
    std::uint64_t m = 1;
    for (int i = 0; i < zeros; ++i) m = (m << 1) | static_cast<std::uint64_t>(in.next());
    return m;
}

/// Integer part of a point: per coordinate gamma(|z| + 1), then a sign bit
/// (1 for negative) when z != 0.
inline BitString encode_integer_part(const IVec& z) {
    BitString out;
    for (auto x : z) {
        const std::uint64_t mag = x < 0 ? static_cast<std::uint64_t>(-(x + 1)) + 1 : static_cast<std::uint64_t>(x);
        gamma_encode(mag + 1, out);
        if (x != 0) out.push_back(x < 0);
    }
    return out;
}

inline IVec decode_integer_part(BitSource& in, std::size_t n) {
    IVec z(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t mag = gamma_decode(in) - 1;
        if (mag == 0) {
            z[i] = 0;
            continue;
        }
        z[i] = in.next() ? -static_cast<std::int64_t>(mag) : static_cast<std::int64_t>(mag);
    }
    return z;
}

inline IVec decode_integer_part(const BitString& bits, std::size_t n) {
    BitReader r(bits);
    IVec z = decode_integer_part(r, n);
    if (!r.at_end()) throw Error("trailing bits after integer part");
    return z;
}

}  // namespace dsim
