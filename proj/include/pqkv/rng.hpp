#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pqkv {

/// Seeded random source with explicit draw math so streams are reproducible
/// across platforms (std::*_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller, two uniforms per draw, no cached spare.
    double normal() {
        double u1 = uniform(), u2 = uniform();
        while (u1 == 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    /// Derives an independent stream, used to give sub-tasks their own seeds.
    std::uint64_t fork_seed() { return engine_() ^ 0x9e3779b97f4a7c15ull; }

private:
    std::mt19937_64 engine_;
};

}  // namespace pqkv
