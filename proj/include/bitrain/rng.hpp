// SPDX-License-Identifier: Apache-2.0
//
// bitrain: bi-directional training simulator for cellular MIMO transceivers

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace bitrain {

/// Splittable counter-style generator (SplitMix64 core). Streams are keyed by
/// an arbitrary list of 64-bit components, so every (seed, trial, link, ...)
/// tuple owns an independent, reproducible sequence regardless of call order.
class Prng {
  public:
    explicit Prng(std::initializer_list<std::uint64_t> keys) {
        state_ = 0x9E3779B97F4A7C15ull;
        for (std::uint64_t k : keys)
            state_ = mix(state_ + 0x632BE59BD9B4E019ull) ^ mix(k);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix(state_);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard real normal N(0, 1) via Box-Muller (second value cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Circularly symmetric complex normal, unit variance (1/2 per real dim).
    std::complex<double> complex_normal() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        double radius = std::sqrt(-std::log(u1));
        double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    /// Uniform QPSK symbol, components +-1/sqrt(2), unit magnitude.
    std::complex<double> qpsk() {
        std::uint64_t bits = next_u64();
        double re = (bits & 1u) ? std::numbers::sqrt2 / 2.0 : -std::numbers::sqrt2 / 2.0;
        double im = (bits & 2u) ? std::numbers::sqrt2 / 2.0 : -std::numbers::sqrt2 / 2.0;
        return {re, im};
    }

    /// Uniform integer in [0, bound), bound >= 1. Rejection-free modulo is fine
    /// for the small bounds used here (user scheduling).
    std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stable 64-bit key combiner for deriving sub-stream seeds.
inline std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) {
    a ^= b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2);
    return a;
}

}  // namespace bitrain
