#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace svos {

// Deterministic RNG used everywhere randomness is needed. Distributions are
// hand-rolled so that a given seed produces the same stream on every build.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), g_(seed ^ 0x9e3779b97f4a7c15ull) {}

  uint64_t next_u64() { return g_(); }

  // in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Independent child stream, stable in (seed, stream).
  Rng fork(uint64_t stream) const {
    uint64_t z = seed_ + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return Rng(z ^ (z >> 31));
  }

 private:
  uint64_t seed_;
  std::mt19937_64 g_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace svos
