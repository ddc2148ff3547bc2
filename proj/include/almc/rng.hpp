#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace almc {

/// Counter-based splittable generator built on the splitmix64 finalizer.
///
/// Output i of stream s under master seed k is a pure function
/// mix(key(k, s) + (i+1)·GAMMA), so streams can be created independently
/// per chain and consumed in any order; results do not depend on how work
/// is divided across threads. Chains derive their stream from
/// (seed, chain index), which keeps every run reproducible bit for bit.
class SplitRng {
 public:
  SplitRng() : SplitRng(0, 0) {}
  SplitRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(mix(seed) ^ mix(GAMMA * (stream + 1)))) {}

  std::uint64_t next_u64() { return mix(key_ + GAMMA * (++counter_)); }

  /// Uniform in [0, 1).
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the paired deviate is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  void fill_normal(double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = next_normal();
  }

 private:
  static constexpr std::uint64_t GAMMA = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace almc
