#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace iqbart {

/// Counter-based SplitMix64 generator.
///
/// Every output is a pure function of (seed, counter), so streams are
/// reproducible bit-for-bit on any platform. All distribution sampling is
/// implemented here rather than through <random> distributions, whose
/// algorithms are implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    ++counter_;
    return mix(seed_ + counter_ * kGamma);
  }

  /// Independent stream keyed by `key`; does not advance this generator.
  Rng derive(std::uint64_t key) const { return Rng(mix(seed_ ^ mix(key + kGamma))); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  /// Gamma(shape, 1) by Marsaglia-Tsang, with the shape<1 boost.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double student_t(double dof) { return normal() / std::sqrt(2.0 * gamma(0.5 * dof) / dof); }

  /// log of a Gamma(shape, 1) variate; stays finite for tiny shapes.
  double log_gamma(double shape) {
    if (shape < 1.0) return std::log(gamma(shape + 1.0)) + std::log(uniform()) / shape;
    return std::log(gamma(shape));
  }

  double beta(double a, double b) {
    const double lx = log_gamma(a);
    const double ly = log_gamma(b);
    return 1.0 / (1.0 + std::exp(ly - lx));
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace iqbart
