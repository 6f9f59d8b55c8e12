#pragma once
// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, counter), so replicate b gets the same numbers no matter
// which thread runs it or in what order.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace nsum {

// Philox4x32-10 block function (Salmon et al. 2011).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

// splitmix64 finalizer, used to fold several indices into one stream id.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive(std::uint64_t a, std::uint64_t b) { return mix64(mix64(a) ^ (b + 0x632BE59BD9B4E019ull)); }
constexpr std::uint64_t derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return derive(derive(a, b), c); }
constexpr std::uint64_t derive(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return derive(derive(a, b, c), d);
}

// Key = seed, counter words 2..3 = stream, words 0..1 = running block index.
class Philox {
public:
    using result_type = std::uint64_t;

    explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)}, stream_(stream) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ >= 4) refill();
        const std::uint64_t lo = buf_[pos_], hi = buf_[pos_ + 1];
        pos_ += 2;
        return (hi << 32) | lo;
    }

    // 53-bit uniform in [0, 1).
    double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }
    // uniform in (0, 1], safe for log().
    double uniform_pos() { return double(((*this)() >> 11) + 1) * 0x1.0p-53; }

    // Unbiased integer in [0, n) (Lemire's multiply-and-reject).
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        unsigned __int128 m = (unsigned __int128)(*this)() * n;
        auto low = std::uint64_t(m);
        if (low < n) {
            const std::uint64_t t = (0 - n) % n;
            while (low < t) {
                m = (unsigned __int128)(*this)() * n;
                low = std::uint64_t(m);
            }
        }
        return std::uint64_t(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // failures before the first success of a Bernoulli(p) sequence
    std::uint64_t geometric(double p) {
        if (p >= 1.0) return 0;
        const double g = std::floor(std::log(uniform_pos()) / std::log1p(-p));
        return g >= 9.0e18 ? std::uint64_t(9e18) : std::uint64_t(g);
    }

    std::uint64_t blocks_used() const { return block_; }

private:
    void refill() {
        buf_ = philox4x32_10({std::uint32_t(block_), std::uint32_t(block_ >> 32), std::uint32_t(stream_),
                              std::uint32_t(stream_ >> 32)},
                             key_);
        ++block_;
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
};

// First k entries become a uniform random k-subset in random order.
template <class T>
void partial_shuffle(std::vector<T>& v, std::size_t k, Philox& rng) {
    const std::size_t n = v.size();
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + std::size_t(rng.below(n - i));
        std::swap(v[i], v[j]);
    }
}

}  // namespace nsum
