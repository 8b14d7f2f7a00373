#ifndef IR2VIS_RNG_HPP
#define IR2VIS_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace ir2vis {

// All stochastic code in the library draws through these helpers rather than
// <random> distributions, whose output is implementation-defined. This keeps
// seeded runs bit-identical across standard libraries.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& g) {
  return static_cast<double>(g() >> 11) * (1.0 / 9007199254740992.0);
}

inline double uniform_range(Rng& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

/// Standard normal via Box-Muller. Consumes two draws per sample; no cached
/// spare, so the stream position is a pure function of the call count.
inline double gaussian(Rng& g) {
  double u1 = uniform01(g);
  double u2 = uniform01(g);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace ir2vis

#endif  // IR2VIS_RNG_HPP
