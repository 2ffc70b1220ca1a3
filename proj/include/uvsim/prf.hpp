// prf.hpp: counter-based pseudo-random function over simulation coordinates.
//
// Every stochastic decision in the simulator (does this MAC mis-time, where
// does the bit splice cut, which images land in which split, how fast is
// this chip) is a pure function of (seed, coordinates, stream tag). There is
// no mutable generator state, so results are independent of evaluation
// order, batching, and thread count, and any single decision can be
// recomputed in isolation. std::uniform_*_distribution is deliberately not
// used anywhere: its output is implementation-defined and would break
// cross-toolchain reproducibility.
#pragma once

#include <cmath>
#include <cstdint>

namespace uvsim {

// Finalizer from splitmix64: a full-avalanche 64-bit mixer. Every input bit
// flips each output bit with probability ~1/2.
constexpr uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// Folds one more coordinate into a running hash. The odd constant keeps
// zero-valued coordinates from being absorbed.
constexpr uint64_t hash_fold(uint64_t h, uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ull));
}

// Hash of an arbitrary coordinate tuple under `seed`.
template <typename... Coords>
constexpr uint64_t hash_tuple(uint64_t seed, Coords... coords) {
  uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ull);
  ((h = hash_fold(h, static_cast<uint64_t>(coords))), ...);
  return h;
}

// Distinct decision streams derived from the same coordinates. Keeping the
// tag inside the hash (not the seed) means e.g. the error decision at a MAC
// and the splice position of that same error never reuse one random value.
enum class Stream : uint64_t {
  kErrorDecision = 1,
  kCorruptCut = 2,
  kSplitShuffle = 3,
  kChipFactorA = 4,
  kChipFactorB = 5,
};

// True with probability p. p <= 0 never fires, p >= 1 always fires; the
// comparison threshold is exact for p in [0,1) because 2^64 * p is
// representable whenever p is a double in that range.
constexpr bool bernoulli(uint64_t h, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  // p < 1 here, so p * 2^64 < 2^64 and the cast is well defined.
  return h < static_cast<uint64_t>(p * 18446744073709551616.0);
}

// Uniform integer in [0, n) by Lemire's multiply-shift reduction. Bias is
// at most n / 2^64, far below anything observable here; we accept it in
// exchange for a branch-free single multiply.
constexpr uint32_t bounded(uint64_t h, uint32_t n) {
  return static_cast<uint32_t>((static_cast<unsigned __int128>(h) * n) >> 64);
}

// Uniform double in [0, 1) with 53 random bits.
constexpr double uniform01(uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Standard normal deviate via Box-Muller from two independent hashes.
// u1 is shifted into (0, 1] so log(u1) is finite.
inline double gaussian(uint64_t h1, uint64_t h2) {
  double u1 = (static_cast<double>(h1 >> 11) + 1.0) * 0x1.0p-53;
  double u2 = uniform01(h2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace uvsim
