#ifndef PANELSSM_RNG_HPP
#define PANELSSM_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace panelssm {

// Counter-based random numbers built on Philox4x32-10 (Salmon et al. 2011).
//
// Streams are identified by 128-bit keys derived hierarchically: any tuple
// (seed, task, unit, iteration, time, particle) maps to its own key via
// repeated child() calls, so every subsequence of the experiment is
// addressable and results do not depend on scheduling or worker count.

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::uint32_t k0, std::uint32_t k1) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::uint32_t k0, std::uint32_t k1) {
    for (int round = 0; round < 10; ++round) {
        philox_round(ctr, k0, k1);
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
    return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

// 128-bit stream identifier. child(i) encrypts the index under the parent
// key, so distinct paths through the derivation tree give independent keys.
class RngKey {
  public:
    RngKey() = default;

    static RngKey from_seed(std::uint64_t seed) {
        RngKey k;
        k.hi_ = detail::splitmix64(seed);
        k.lo_ = detail::splitmix64(seed ^ 0xA5A5A5A5A5A5A5A5ull);
        return k;
    }

    RngKey child(std::uint64_t index) const {
        const std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(index),
            static_cast<std::uint32_t>(index >> 32),
            static_cast<std::uint32_t>(hi_),
            static_cast<std::uint32_t>(hi_ >> 32),
        };
        const auto out = detail::philox4x32_10(
            ctr, static_cast<std::uint32_t>(lo_), static_cast<std::uint32_t>(lo_ >> 32));
        RngKey k;
        k.hi_ = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        k.lo_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        return k;
    }

    std::uint64_t hi() const { return hi_; }
    std::uint64_t lo() const { return lo_; }

    friend bool operator==(const RngKey& a, const RngKey& b) {
        return a.hi_ == b.hi_ && a.lo_ == b.lo_;
    }

  private:
    std::uint64_t hi_ = 0;
    std::uint64_t lo_ = 0;
};

// Draw-by-draw generator over one key. The key's low word keys the Philox
// block cipher, the high word pins the upper counter half, and the draw
// position fills the lower half, so the stream never collides with children
// of the same key.
class RngStream {
  public:
    explicit RngStream(const RngKey& key)
        : k0_(static_cast<std::uint32_t>(key.lo())),
          k1_(static_cast<std::uint32_t>(key.lo() >> 32)),
          c2_(static_cast<std::uint32_t>(key.hi())),
          c3_(static_cast<std::uint32_t>(key.hi() >> 32)) {}

    std::uint32_t next_u32() {
        if (have_ == 0) {
            buf_ = detail::philox4x32_10(
                {static_cast<std::uint32_t>(pos_), static_cast<std::uint32_t>(pos_ >> 32), c2_, c3_},
                k0_, k1_);
            ++pos_;
            have_ = 4;
        }
        return buf_[4 - have_--];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe under log().
    double u01_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * u01(); }

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(u01_pos()));
        const double theta = 6.283185307179586476925286766559 * u01();
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

  private:
    std::uint32_t k0_, k1_, c2_, c3_;
    std::uint64_t pos_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int have_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace panelssm

#endif
