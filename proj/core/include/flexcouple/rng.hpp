#pragma once

// Seeded deterministic RNG with a pinned engine and a pinned uniform
// mapping. std::mt19937_64 would do for the engine, but libstdc++'s
// uniform_real_distribution is implementation-defined, and byte-identical
// logs across toolchains require every generated double to be pinned.

#include <cstdint>

namespace flexcouple {

// splitmix64 stream.
class UniformRng {
 public:
  explicit UniformRng(std::uint64_t seed)
      : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t bits() { return step(); }

  // uniform in [0, 1), 53 random bits
  double next() { return static_cast<double>(step() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * next(); }
  // uniform in [-amplitude, amplitude]
  double symmetric(double amplitude) { return range(-amplitude, amplitude); }

 private:
  std::uint64_t step() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

// Stable per-trial / per-stream seed derivation: hash-mixes the base seed
// with stream coordinates so trials are independent of worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
  std::uint64_t z = base ^ (0x9e3779b97f4a7c15ull + (a << 6) + (b << 24));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z ? z : 1;
}

}  // namespace flexcouple
