#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace scenecarve {

// The standard distributions are implementation-defined; these conversions
// of the raw 64-bit engine output give the same numbers on every platform.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Integer in [0, n); n > 0.
inline int uniform_index(Rng& rng, int n) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

inline double normal(Rng& rng, double sigma) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace scenecarve
