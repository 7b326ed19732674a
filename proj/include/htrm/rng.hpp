#ifndef HTRM_RNG_HPP
#define HTRM_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace htrm {

/// Channels separate the independent uses of randomness inside one trial.
enum class Channel : std::uint32_t {
    entries = 0,
    lanczos_start = 1,
    sparse_mask = 2,
    synthetic = 3,
};

/// Counter-based Philox4x32-10 generator.
///
/// The 64-bit seed is the key; the 128-bit counter is split into a 64-bit
/// stream id and a 64-bit block index. Two generators with different
/// (seed, stream) pairs never produce overlapping blocks, so trial t of an
/// experiment can be replayed in isolation and in any order.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    /// Substream for (seed, trial, channel). Stream ids are trial * 16 + channel.
    static Rng substream(std::uint64_t seed, std::uint64_t trial,
                         Channel channel = Channel::entries) {
        return Rng(seed, (trial << 4) | static_cast<std::uint64_t>(channel));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    std::uint64_t next_u64() {
        if (lane_ == 2) {
            refill();
        }
        return buffer_[lane_++];
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        // Lemire's multiply-shift with rejection.
        while (true) {
            const std::uint64_t x = next_u64();
            const __uint128_t m = static_cast<__uint128_t>(x) * bound;
            const auto low = static_cast<std::uint64_t>(m);
            if (low >= bound || low >= (-bound) % bound) {
                return static_cast<std::uint64_t>(m >> 64);
            }
        }
    }

    /// Fair coin.
    bool coin() { return (next_u64() >> 63) != 0; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

private:
    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
        const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    void refill() {
        std::array<std::uint32_t, 4> ctr{
            static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                         static_cast<std::uint32_t>(seed_ >> 32)};
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(0xD2511F53u, ctr[0], hi0, lo0);
            mulhilo(0xCD9E8D57u, ctr[2], hi1, lo1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        buffer_[0] = (static_cast<std::uint64_t>(ctr[1]) << 32) | ctr[0];
        buffer_[1] = (static_cast<std::uint64_t>(ctr[3]) << 32) | ctr[2];
        ++block_;
        lane_ = 0;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int lane_ = 2;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace htrm

#endif
