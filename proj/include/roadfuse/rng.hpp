#pragma once

// Counter-based deterministic random number generation. Every random draw in
// the library is a pure function of (seed, stream, counter), so outputs never
// depend on evaluation order, platform, or standard-library distribution
// internals.

#include <cmath>
#include <cstdint>

namespace roadfuse {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Stateless keyed generator: mixes up to three key words with the seed.
/// Use one stream id per purpose (see streams below) so draws never collide.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0,
                 std::uint64_t index = 0)
        : state_(mix(seed, stream, index)), counter_(0) {}

    /// Next raw 64-bit word.
    std::uint64_t next_u64() {
        return detail::splitmix64(state_ + 0x632be59bd9b4e019ULL * ++counter_);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Multiply-shift; bias is negligible for n << 2^64.
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Avoid log(0).
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        spare_ = r * std::sin(two_pi * u2);
        have_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
        std::uint64_t h = detail::splitmix64(a);
        h = detail::splitmix64(h ^ (b + 0x9e3779b97f4a7c15ULL));
        h = detail::splitmix64(h ^ (c + 0x7f4a7c159e3779b9ULL));
        return h;
    }

    std::uint64_t state_;
    std::uint64_t counter_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Stream ids used by the scenario generator and detection pipeline.
namespace streams {
constexpr std::uint64_t arrivals = 1;
constexpr std::uint64_t camera = 2;
constexpr std::uint64_t lidar_ground = 3;
constexpr std::uint64_t lidar_vehicle = 4;
constexpr std::uint64_t lidar_air = 5;
constexpr std::uint64_t lidar_centroid = 6;
constexpr std::uint64_t ransac = 7;
} // namespace streams

} // namespace roadfuse
