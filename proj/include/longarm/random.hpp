#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace longarm {

/// 64-bit finalizer of splitmix64. Stateless; used for all seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Seed of task `index` under `master`: mix64(master XOR golden * index).
constexpr std::uint64_t task_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ (kGoldenGamma * index));
}

/// Counter-based uniform in [0,1) for a keyed event, e.g. one edge of a
/// percolation realization. Independent of any stream state.
constexpr double keyed_uniform(std::uint64_t seed, std::uint64_t key) {
  return static_cast<double>(mix64(seed ^ mix64(key)) >> 11) * 0x1.0p-53;
}

/// A single-owner random stream. Conversions to real numbers are done here
/// bit-exactly so streams reproduce across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0,1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1].
  double uniform_open_low() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential() { return -std::log(uniform_open_low()); }

  /// Number of failures before the first success, success probability q in (0,1].
  std::uint64_t geometric(double q) {
    if (q >= 1.0) return 0;
    const double g = std::floor(std::log(uniform_open_low()) / std::log1p(-q));
    return g >= 1.8e19 ? UINT64_MAX : static_cast<std::uint64_t>(g);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace longarm
