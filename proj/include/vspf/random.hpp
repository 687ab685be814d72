#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is a pure function
// of (key, counter), so streams can be split per voxel, per iteration or per
// worker without any shared state.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace vspf::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter philox4x32(Counter ctr, Key key)
{
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
               static_cast<std::uint32_t>(p0)};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

inline Key key_from(std::uint64_t seed)
{
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Four 32-bit words for the 128-bit counter (a, b) under `seed`.
inline Counter block(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
{
    return philox4x32({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                       static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)},
                      key_from(seed));
}

/// 53-bit uniform in [0, 1) from two words.
inline double to_unit(std::uint32_t hi, std::uint32_t lo)
{
    const std::uint64_t bits = (std::uint64_t{hi} << 21) ^ (std::uint64_t{lo} >> 11);
    return static_cast<double>(bits & ((std::uint64_t{1} << 53) - 1)) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
{
    const Counter c = block(seed, a, b);
    return to_unit(c[0], c[1]);
}

/// Mixes a parent seed with stream identifiers into a child seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
{
    const Counter c = block(seed ^ 0x5DEECE66DULL, a, b);
    return (std::uint64_t{c[2]} << 32) | c[3];
}

/// Sequential view over one counter stream; draw i uses counter (stream, i).
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    double uniform()
    {
        refill_if_empty();
        const double u = to_unit(buf_[pos_], buf_[pos_ + 1]);
        pos_ += 2;
        return u;
    }

    /// Standard normal via Box-Muller; platform independent, unlike std::normal_distribution.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    void refill_if_empty()
    {
        if (pos_ < 4) return;
        buf_ = block(seed_, stream_, counter_++);
        pos_ = 0;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Counter buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace vspf::rng
