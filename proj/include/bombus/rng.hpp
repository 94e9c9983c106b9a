#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bombus {

// Stable 64-bit FNV-1a of a string. Used to derive per-record seeds, so it
// must not change between releases.
std::uint64_t hash_string(std::string_view text) noexcept;

// SplitMix64 finalizer over the pair; order matters.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// Seeded generator whose outputs are identical on every platform.
///
/// The standard distributions are implementation-defined, so all sampling
/// here is derived directly from mt19937_64 bits.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lower, upper]; returns lower when the interval is degenerate.
    double uniform(double lower, double upper);
    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);
    // Uniform integer in [lower, upper].
    std::int64_t between(std::int64_t lower, std::int64_t upper);
    bool bernoulli(double p);
    // Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace bombus
