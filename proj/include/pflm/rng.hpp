#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace pflm {

// Deterministic splittable RNG. Substreams are derived by hashing
// (seed, stream, role) through SplitMix64, so any replicate draws the
// same variates no matter how work is scheduled across threads.
//
// Generator is xoshiro256** (Blackman/Vigna, public domain reference
// implementation), seeded from the hashed key.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Order-sensitive avalanche of three 64-bit words into one key.
inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t role) {
  std::uint64_t s = seed;
  std::uint64_t acc = splitmix64(s);
  s ^= stream + 0x9E3779B97F4A7C15ULL + (acc << 6) + (acc >> 2);
  acc ^= splitmix64(s);
  s ^= role + 0x9E3779B97F4A7C15ULL + (acc << 6) + (acc >> 2);
  acc ^= splitmix64(s);
  return acc;
}

// Stream roles. Fixed numbers are part of the reproducibility contract:
// renumbering changes every seeded output.
enum class Role : std::uint64_t {
  covariates = 1,
  process = 2,
  noise = 3,
  packing = 4,
  monte_carlo = 5,
  instance = 6,
};

class Rng {
 public:
  explicit Rng(std::uint64_t key) {
    std::uint64_t s = key;
    for (auto& word : state_) word = splitmix64(s);
  }
  Rng(std::uint64_t seed, std::uint64_t stream, Role role)
      : Rng(mix_key(seed, stream, static_cast<std::uint64_t>(role))) {}

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Box-Muller; two uniforms per variate, no cached state.
  double normal() {
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale) {
    const double u = uniform01() - 0.5;
    const double a = 1.0 - 2.0 * std::abs(u);
    const double mag = -scale * std::log(a > 0.0 ? a : 0x1.0p-53);
    return u < 0.0 ? -mag : mag;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace pflm
