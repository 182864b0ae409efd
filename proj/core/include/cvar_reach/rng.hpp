#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cvar_reach {

/// Stateless counter-based generator: every draw is a pure function of
/// (seed, stream, a, b, c), so results never depend on evaluation order or
/// thread schedule. The mixing function is the SplitMix64 finalizer.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

    constexpr std::uint64_t bits(std::uint64_t stream, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) const {
        std::uint64_t h = mix(seed_ + 0x9E3779B97F4A7C15ULL * (stream + 1));
        h = mix(h ^ (a + 0x632BE59BD9B4E019ULL));
        h = mix(h ^ (b + 0x8CB92BA72F3D8DD7ULL));
        h = mix(h ^ (c + 0xD1B54A32D192ED03ULL));
        return h;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform(std::uint64_t stream, std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return static_cast<double>(bits(stream, a, b, c) >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on two derived uniforms.
    double normal(std::uint64_t stream, std::uint64_t a, std::uint64_t b) const {
        const double u1 = 1.0 - uniform(stream, a, b, 0); // (0, 1]
        const double u2 = uniform(stream, a, b, 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    constexpr std::uint64_t seed() const { return seed_; }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
};

/// Stream identifiers keep the different random quantities of one run disjoint.
namespace rng_stream {
inline constexpr std::uint64_t disturbance = 0;
inline constexpr std::uint64_t jitter_w0 = 1;
inline constexpr std::uint64_t jitter_j0 = 2;
inline constexpr std::uint64_t bootstrap = 3;
inline constexpr std::uint64_t generic_jitter = 4;
} // namespace rng_stream

} // namespace cvar_reach
