#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace cpof {

// splitmix64 finalizer; used to derive independent stream seeds from tuples.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

/// Seeded random stream with a fixed, documented algorithm for every draw so
/// that sequences are reproducible across standard library implementations:
///   - engine: std::mt19937_64 seeded with the 64-bit seed
///   - below(k): rejection sampling on raw 64-bit outputs, then modulo k
///   - uniform(): top 53 bits scaled to [0, 1)
///   - normal(): Box-Muller, one value per pair of uniforms (no caching)
class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  std::uint64_t below(std::uint64_t k) {
    const std::uint64_t limit = k == 0 ? 0 : (~std::uint64_t{0} - (~std::uint64_t{0} % k + 1) % k);
    std::uint64_t x = engine_();
    while (x > limit) x = engine_();
    return x % k;
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cpof
