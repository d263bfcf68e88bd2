#pragma once

#include <cmath>
#include <cstdint>

namespace oasis {

// SplitMix64 generator (Steele, Lea & Flood's splittable PRNG family).
// All randomness in the library flows through this type so that results are
// reproducible byte-for-byte across platforms and standard libraries;
// std::mt19937 is avoided because the std distributions are not portable.
//
// Substreams are derived by hashing (seed, tag) with the SplitMix64
// finalizer, so per-cluster, per-repeat and per-replicate streams are
// statistically independent and order-insensitive.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Independent substream keyed by (current seed, tag).
    Rng split(std::uint64_t tag) const {
        return Rng(mix(state_ + 0x9E3779B97F4A7C15ULL * (tag + 1)));
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform01_open() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller (no state cached between calls).
    double normal() {
        const double u = uniform01_open();
        const double v = uniform01();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925287 * v);
    }

    bool bernoulli(double p) { return uniform01() < p; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace oasis
