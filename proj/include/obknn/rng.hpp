#pragma once

// Deterministic random helpers built on std::mt19937_64.
//
// The raw mt19937_64 stream is specified by the C++ standard and therefore
// identical on every platform. The standard *distributions* are not, so
// everything that must reproduce across platforms (episode sampling,
// synthetic data) goes through the helpers below instead of
// std::uniform_int_distribution / std::normal_distribution.

#include <cmath>
#include <cstdint>
#include <random>

#include "obknn/errors.hpp"

namespace obknn {

using Rng = std::mt19937_64;

// Uniform integer in [0, n) via rejection sampling. Exactly uniform,
// same output sequence everywhere.
inline std::uint64_t bounded_uint64(Rng& rng, std::uint64_t n) {
    if (n == 0) {
        throw InvalidArgumentError("bounded_uint64: n must be positive");
    }
    // Smallest value accepted so that the accepted range is a multiple of n.
    const std::uint64_t min = (-n) % n;
    std::uint64_t r = rng();
    while (r < min) {
        r = rng();
    }
    return r % n;
}

// Uniform double in [0, 1) with 53 random mantissa bits.
inline double unit_double(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (cosine branch only, no state).
inline double gaussian(Rng& rng) {
    const double u1 = 1.0 - unit_double(rng);  // (0, 1], keeps log finite
    const double u2 = unit_double(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace obknn
