#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "artic/lie.hpp"

namespace artic {

// Deterministic seed derivation for independent substreams (restarts, sweep
// runs, generator stages). Fixed function of (seed, index); never identity.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index));
}

// Philox4x32-10 counter-based generator (Salmon et al. constants). The key is
// the 64-bit seed; the counter is the draw index, so the stream is a pure
// function of (seed, draw number) and identical on every platform.
//
// Draw accounting, so streams can be reasoned about exactly:
//   next_u64 / uniform01 / uniform(a,b)  -> 1 counter tick
//   normal()                             -> 2 ticks (Box-Muller, cos branch)
//   unit_vector3 / unit_vector6          -> 6 / 12 ticks per attempt
//   rotation_uniform                     -> 8 ticks per attempt (quaternion)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_lo_(static_cast<std::uint32_t>(seed)),
                                     key_hi_(static_cast<std::uint32_t>(seed >> 32)) {}

  std::uint64_t next_u64() {
    const std::uint64_t n = counter_++;
    std::uint32_t c0 = static_cast<std::uint32_t>(n);
    std::uint32_t c1 = static_cast<std::uint32_t>(n >> 32);
    std::uint32_t c2 = 0, c3 = 0;
    std::uint32_t k0 = key_lo_, k1 = key_hi_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = 0xD2511F53ull * c0;
      const std::uint64_t p1 = 0xCD9E8D57ull * c2;
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n1 = lo1;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      const std::uint32_t n3 = lo0;
      c0 = n0; c1 = n1; c2 = n2; c3 = n3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return static_cast<std::uint64_t>(c0) | (static_cast<std::uint64_t>(c1) << 32);
  }

  // [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // One standard normal from two uniforms; no cached state.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vector3 normal3() {
    Vector3 x;
    x << normal(), normal(), normal();
    return x;
  }

  Twist normal_twist(double sigma_v, double sigma_w) {
    return Twist(sigma_v * normal3(), sigma_w * normal3());
  }

  Vector3 unit_vector3() {
    for (;;) {
      const Vector3 x = normal3();
      const double n = x.norm();
      if (n > 1e-9) return x / n;
    }
  }

  Twist unit_twist6() {
    for (;;) {
      const Twist t(normal3(), normal3());
      const double n = t.norm();
      if (n > 1e-9) return t * (1.0 / n);
    }
  }

  // Uniform over SO(3) via normalized Gaussian quaternion.
  Matrix3 rotation_uniform() {
    for (;;) {
      const double a = normal(), b = normal(), c = normal(), d = normal();
      const double n = std::sqrt(a * a + b * b + c * c + d * d);
      if (n <= 1e-9) continue;
      return Eigen::Quaterniond(a / n, b / n, c / n, d / n).toRotationMatrix();
    }
  }

 private:
  std::uint32_t key_lo_, key_hi_;
  std::uint64_t counter_ = 0;
};

}  // namespace artic
