#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace doq {

/// Mixes a master seed with a stream id so that independent consumers
/// (sampler, split shuffle, initializers, ...) never share a stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic generator. The core is std::mt19937_64 (fully specified by
/// the standard); all floating-point draws are built here from raw 64-bit
/// words instead of std::*_distribution, whose output is
/// implementation-defined. Same seed, same sequence, everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1); never returns an endpoint, safe under log().
  double uniform_open01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n), n >= 1, by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  /// Rate-1 exponential, strictly positive.
  double exponential() { return -std::log(uniform_open01()); }

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open01();
    const double u2 = uniform_open01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  /// Circularly symmetric complex normal CN(0,1): Re and Im are independent
  /// N(0, 1/2), so E|z|^2 = 1.
  std::complex<double> complex_normal_unit() {
    const double s = 0.70710678118654752440;  // 1/sqrt(2)
    const double re = normal();
    const double im = normal();
    return {re * s, im * s};
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace doq
