#pragma once

#include <cstdint>
#include <random>

namespace nhar {

/// Engine used everywhere. Variate transforms are written out explicitly
/// (instead of std::*_distribution) so a given seed produces the same stream
/// on every standard library.
using Rng = std::mt19937_64;

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one Monte Carlo replication: a documented mix of
/// (master seed, cell index, replication index). Any cell/replication is
/// re-runnable in isolation, and results do not depend on scheduling.
inline std::uint64_t replication_seed(std::uint64_t master, std::uint64_t cell,
                                      std::uint64_t rep) {
  return mix64(mix64(mix64(master) ^ cell) ^ rep);
}

}  // namespace nhar
