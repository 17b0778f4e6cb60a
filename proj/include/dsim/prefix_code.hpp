#pragma once

// Optimal prefix-free (Huffman) code over a decomposition table, with an
// Escape symbol carrying the residual mass. Ties are broken by symbol order
// (table order, Escape last) and codewords are assigned canonically, so the
// code is a deterministic function of the table.
//
// After an Escape codeword the cube itself follows: gamma(k - k_max), the
// root index in ceil(log2 #roots) bits, then n bits per level of the path
// from the root. This keeps the scheme exact when the source lands in mass
// that the table does not enumerate.

#include <queue>
#include <unordered_map>

#include "dsim/bitstring.hpp"
#include "dsim/dyadic.hpp"

namespace dsim {

/// Huffman code lengths for the given weights; deterministic tie-breaking by
/// (weight, creation order) with leaves created first in index order.
inline std::vector<int> huffman_lengths(std::span<const double> w) {
    const std::size_t m = w.size();
    require(m > 0, "cannot build a code for an empty alphabet");
    if (m == 1) return {0};
    using Item = std::pair<double, std::size_t>;  // (weight, node id)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    std::vector<std::size_t> parent(2 * m - 1, 0);
    for (std::size_t i = 0; i < m; ++i) pq.push({w[i], i});
    std::size_t next = m;
    while (pq.size() > 1) {
        const Item a = pq.top();
        pq.pop();
        const Item b = pq.top();
        pq.pop();
        parent[a.second] = parent[b.second] = next;
        pq.push({a.first + b.first, next++});
    }
    const std::size_t root = next - 1;
    std::vector<int> depth(2 * m - 1, 0);
    for (std::size_t id = root; id-- > 0;) depth[id] = depth[parent[id]] + 1;
    return std::vector<int>(depth.begin(), depth.begin() + static_cast<std::ptrdiff_t>(m));
}

class PrefixCode {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    /// Code over the table's explicit entries plus Escape when residual_mass > 0.
    static PrefixCode build(const DecompositionTable& t, std::vector<DyadicCube> roots) {
        require(t.entries_complete && t.entry_count() > 0, "prefix code needs a nonempty table with explicit entries");
        PrefixCode c;
        c.n_ = t.n;
        c.k_max_ = t.k_max;
        c.roots_ = std::move(roots);
        require(!c.roots_.empty(), "prefix code needs the root cubes");
        c.k_root_ = c.roots_.front().k;
        const std::size_t m = t.entry_count();
        c.cubes_.reserve(m);
        c.probs_.reserve(m + 1);
        for (std::size_t i = 0; i < m; ++i) {
            c.cubes_.push_back(t.entry(i));
            c.probs_.push_back(t.probability(i));
            c.index_.emplace(c.cubes_.back(), i);
        }
        if (t.residual_mass > 0) {
            c.escape_ = m;
            c.probs_.push_back(t.residual_mass);
        }
        c.lengths_ = huffman_lengths(c.probs_);
        c.assign_canonical();
        for (std::size_t i = 0; i < c.roots_.size(); ++i) c.root_index_.emplace(c.roots_[i], i);
        while ((std::size_t{1} << c.root_bits_) < c.roots_.size()) ++c.root_bits_;
        return c;
    }

    std::size_t symbol_count() const { return probs_.size(); }
    bool has_escape() const { return escape_ != npos; }
    std::size_t escape_symbol() const { return escape_; }
    const DyadicCube& cube(std::size_t s) const { return cubes_.at(s); }
    double probability(std::size_t s) const { return probs_[s]; }
    int length(std::size_t s) const { return lengths_[s]; }
    int max_length() const { return *std::max_element(lengths_.begin(), lengths_.end()); }

    BitString codeword(std::size_t s) const {
        BitString b;
        for (int i = lengths_[s] - 1; i >= 0; --i) b.push_back((codes_[s] >> i) & 1U);
        return b;
    }

    std::size_t symbol_of(const DyadicCube& c) const {
        auto it = index_.find(c);
        return it == index_.end() ? npos : it->second;
    }

    double expected_length() const {
        long double s = 0;
        for (std::size_t i = 0; i < probs_.size(); ++i) s += probs_[i] * lengths_[i];
        return static_cast<double>(s);
    }

    double kraft_sum() const {
        long double s = 0;
        for (int l : lengths_) s += std::ldexp(1.0L, -l);
        return static_cast<double>(s);
    }

    /// Entropy of the symbol distribution (entries plus Escape) in bits.
    double symbol_entropy() const {
        long double h = 0;
        for (double p : probs_)
            if (p > 0) h -= p * std::log2(static_cast<long double>(p));
        return static_cast<double>(h);
    }

    /// Codeword of an enumerated cube, or Escape plus the cube's explicit path.
    BitString encode(const DyadicCube& c) const {
        const std::size_t s = symbol_of(c);
        if (s != npos) return codeword(s);
        require(has_escape(), "cube is not in the code's table");
        require(c.k > k_max_, "cube above k_max is not in the table");
        BitString b = codeword(escape_);
        gamma_encode(static_cast<std::uint64_t>(c.k - k_max_), b);
        DyadicCube anc = c;
        std::vector<std::uint64_t> path;
        while (anc.k > k_root_) {
            path.push_back(anc.child_index());
            anc = anc.parent();
        }
        auto it = root_index_.find(anc);
        require(it != root_index_.end(), "cube lies outside the root cubes");
        for (int i = root_bits_ - 1; i >= 0; --i) b.push_back((it->second >> i) & 1U);
        for (auto p = path.rbegin(); p != path.rend(); ++p)
            for (int i = static_cast<int>(n_) - 1; i >= 0; --i) b.push_back((*p >> i) & 1U);
        return b;
    }

    /// Decodes one symbol (canonical decoding).
    std::size_t decode_symbol(BitSource& in) const {
        if (lengths_.size() == 1) return 0;
        std::uint64_t code = 0;
        for (int len = 1; len <= max_len_; ++len) {
            code = (code << 1) | static_cast<std::uint64_t>(in.next());
            const auto& lv = by_length_[len];
            if (lv.count && code - lv.first_code < lv.count) return sorted_[lv.first_index + (code - lv.first_code)];
        }
        throw Error("undecodable codeword");
    }

    /// Decodes a cube, following an Escape with its explicit path.
    DyadicCube decode(BitSource& in, bool* escaped = nullptr) const {
        const std::size_t s = decode_symbol(in);
        if (escaped) *escaped = (s == escape_);
        if (s != escape_) return cubes_[s];
        const int k = k_max_ + static_cast<int>(gamma_decode(in));
        std::uint64_t r = 0;
        for (int i = 0; i < root_bits_; ++i) r = (r << 1) | static_cast<std::uint64_t>(in.next());
        if (r >= roots_.size()) throw Error("escape path names an unknown root");
        DyadicCube c = roots_[r];
        while (c.k < k) {
            std::uint64_t idx = 0;
            for (std::size_t i = 0; i < n_; ++i) idx = (idx << 1) | static_cast<std::uint64_t>(in.next());
            c = c.child(idx);
        }
        return c;
    }

    DyadicCube decode(const BitString& bits, std::size_t* consumed = nullptr) const {
        BitReader r(bits);
        DyadicCube c = decode(r);
        if (consumed) *consumed = r.position();
        return c;
    }

private:
    struct LengthInfo {
        std::uint64_t first_code = 0;
        std::size_t first_index = 0;
        std::uint64_t count = 0;
    };

    void assign_canonical() {
        const std::size_t m = lengths_.size();
        max_len_ = *std::max_element(lengths_.begin(), lengths_.end());
        require(max_len_ <= 63, "codeword length exceeds 63 bits");
        sorted_.resize(m);
        for (std::size_t i = 0; i < m; ++i) sorted_[i] = i;
        std::stable_sort(sorted_.begin(), sorted_.end(), [&](std::size_t a, std::size_t b) { return lengths_[a] < lengths_[b]; });
        codes_.assign(m, 0);
        by_length_.assign(static_cast<std::size_t>(max_len_) + 1, {});
        std::uint64_t code = 0;
        int prev = lengths_[sorted_[0]];
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t s = sorted_[j];
            const int len = lengths_[s];
            if (j > 0) {
                ++code;
                code <<= (len - prev);
            }
            prev = len;
            codes_[s] = code;
            auto& lv = by_length_[static_cast<std::size_t>(len)];
            if (lv.count == 0) {
                lv.first_code = code;
                lv.first_index = j;
            }
            ++lv.count;
        }
    }

    std::size_t n_ = 0;
    int k_root_ = 0, k_max_ = 0;
    std::vector<DyadicCube> cubes_;
    std::vector<double> probs_;
    std::vector<int> lengths_;
    std::vector<std::uint64_t> codes_;
    std::vector<std::size_t> sorted_;
    std::vector<LengthInfo> by_length_;
    int max_len_ = 0;
    std::size_t escape_ = npos;
    std::unordered_map<DyadicCube, std::size_t, DyadicCubeHash> index_;
    std::vector<DyadicCube> roots_;
    std::unordered_map<DyadicCube, std::size_t, DyadicCubeHash> root_index_;
    int root_bits_ = 0;
};

inline PrefixCode build_prefix_code(const DecompositionTable& t, const Region& r) {
    return PrefixCode::build(t, root_cubes(r));
}

}  // namespace dsim
