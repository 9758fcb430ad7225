#pragma once

#include <cmath>
#include <cstdint>

namespace strokeppg {

// Counter-based 64-bit generator: output i is a bijective mix of
// (seed, i), so streams are reproducible across platforms and can be
// split without carrying state around.
class Prng {
 public:
  explicit Prng(uint64_t seed) : seed_(seed) {}

  static uint64_t mix(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  // Independent stream for (seed, index), e.g. one per patient.
  static Prng derive(uint64_t seed, uint64_t stream) {
    return Prng(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ull)));
  }

  uint64_t next_u64() { return mix(seed_ + counter_++ * 0x9E3779B97F4A7C15ull); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (cosine branch only, so one draw
  // consumes exactly two counter steps).
  double next_normal() {
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace strokeppg
