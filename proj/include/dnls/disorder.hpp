#pragma once

// i.i.d. uniform [0,1] potentials from a counter-based generator: the value
// at site j depends only on (seed, j), never on the box or on draw order.

#include "dnls/lattice.hpp"

#include <cstdint>

namespace dnls {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0,1) for (seed, stream, counter).
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t const h = splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ counter);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double site_potential(std::uint64_t seed, int j) {
  return counter_uniform(seed, 0x706f74656e7469ULL, static_cast<std::uint64_t>(static_cast<std::int64_t>(j)));
}

inline DisorderRealization sample_potential(std::uint64_t seed, LatticeBox box) {
  DisorderRealization V(box, seed);
  for (int j = -box.half_width; j <= box.half_width; ++j) V.v[box.offset(j)] = site_potential(seed, j);
  return V;
}

}  // namespace dnls
