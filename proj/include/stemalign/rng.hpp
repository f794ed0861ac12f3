#pragma once

#include <cmath>
#include <cstdint>

namespace stemalign {

/// Deterministic counter-based random generator (splitmix64 core).
///
/// Every randomized stage derives one stream per logical work item via
/// fork(), so results do not depend on thread scheduling. The standard
/// library distributions are deliberately avoided: their output is not
/// pinned across implementations, and reproducibility of seeded runs is
/// part of the contract here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint32_t next_below(std::uint32_t n) {
        // Lemire's multiply-shift rejection method, bias-free.
        std::uint64_t x = next_u64() & 0xffffffffull;
        std::uint64_t m = x * n;
        std::uint32_t lo = static_cast<std::uint32_t>(m);
        if (lo < n) {
            std::uint32_t t = (0u - n) % n;
            while (lo < t) {
                x = next_u64() & 0xffffffffull;
                m = x * n;
                lo = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

    /// Zero-mean Gaussian via Box-Muller (deterministic, no cached spare).
    double normal(double sigma) {
        double u1 = 0.0;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        double u2 = next_double();
        return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Derive an independent stream for work item `id`.
    Rng fork(std::uint64_t id) const {
        Rng child(0);
        child.state_ = mix(state_ ^ mix(id + 0x517cc1b727220a95ull));
        return child;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace stemalign
