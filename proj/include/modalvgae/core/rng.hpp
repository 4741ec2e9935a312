#pragma once

/**
 * @file rng.hpp
 * @brief Portable random streams.
 *
 * std::mt19937_64 produces the same integer sequence on every conforming
 * implementation, but the std distributions do not. All real-valued draws
 * here are derived from the raw 64-bit stream so generated data is
 * byte-identical across platforms.
 */

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mvgae {

/// Tags separating independent streams derived from one master seed.
enum class Stream : std::uint64_t {
    Geometry = 1,
    Material = 2,
    Damping = 3,
    Excitation = 4,
    Noise = 5,
    SensorMask = 6,
    Init = 7,
    Shuffle = 8,
    Dropout = 9,
    Latent = 10,
    Swag = 11,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for (master, index, stream); independent of generation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, Stream tag) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ index);
    return splitmix64(h ^ static_cast<std::uint64_t>(tag));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
    Rng(std::uint64_t master, std::uint64_t index, Stream tag)
        : engine_(derive_seed(master, index, tag)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] (inclusive), rejection sampled.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(engine_());
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return lo + static_cast<std::int64_t>(r % span);
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Fisher-Yates shuffle driven by this stream.
    template <class Range>
    void shuffle(Range& r) {
        const auto n = static_cast<std::int64_t>(std::size(r));
        for (std::int64_t i = n - 1; i > 0; --i) {
            const auto j = uniform_int(0, i);
            using std::swap;
            swap(r[static_cast<std::size_t>(i)], r[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mvgae
