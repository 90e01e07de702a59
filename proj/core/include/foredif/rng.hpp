#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace foredif {

/// splitmix64 finalizer; the basis for all seed derivation.
constexpr uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a stream index.
/// Every source of randomness in the project is a named stream keyed
/// off one master seed through chains of these calls.
constexpr uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    return mix64(seed ^ mix64(stream + 0x12b4a9f3c6d5e7ULL));
}

constexpr uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}

constexpr uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
    return derive_seed(derive_seed(seed, a, b), c);
}

/// Deterministic pseudo-random generator (splitmix64 state walk with
/// hand-rolled Box-Muller normals). std::normal_distribution is
/// implementation-defined, so it is not used anywhere results must be
/// reproducible bit-for-bit.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(mix64(seed ^ 0x7c15d1f0e8b3a6ULL)) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace foredif
