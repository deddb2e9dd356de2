#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mvnbc {

// Deterministic generator with cheap independent substreams. xoshiro256**
// seeded through the splitmix64 finalizer; normals by Box-Muller on exactly
// two uniforms per draw (no caching), so draw counts — and therefore parallel
// replication streams — are reproducible by construction. Not relying on
// std::normal_distribution keeps the byte stream independent of the standard
// library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : state_) w = splitmix(x);
    }

    // Substream keyed by (seed, a, b); used as (seed, sample size, replication).
    static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
        std::uint64_t x = seed;
        x = mix(x + 0x9E3779B97F4A7C15ULL * (a + 1));
        x = mix(x + 0x9E3779B97F4A7C15ULL * (b + 1));
        return Rng(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform on (0, 1]
    double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t splitmix(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        return mix(x);
    }

    std::array<std::uint64_t, 4> state_{};
};

}  // namespace mvnbc
