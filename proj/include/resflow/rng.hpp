#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "resflow/errors.hpp"

namespace resflow {

// Deterministic random source. The engine is std::mt19937_64 (its output
// sequence is pinned by the standard); the variate transforms are written
// out explicitly because the std::*_distribution classes are free to differ
// between library versions, which would break seed reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive, rejection-sampled (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw RangeError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(eng_());  // full 64-bit range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (no cached spare, so state advances by
  // exactly two engine draws per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double lognormal(double mu, double sigma) {
    return std::exp(mu + sigma * normal());
  }

  // Geometric on {0, 1, 2, ...} with success probability p; mean (1-p)/p.
  std::int64_t geometric(double p) {
    if (p <= 0.0 || p > 1.0) throw RangeError("geometric: p must be in (0,1]");
    if (p == 1.0) return 0;
    const double u = 1.0 - uniform();  // (0, 1]
    const double k = std::floor(std::log(u) / std::log1p(-p));
    const double capped = std::min(k, 1e6);
    return static_cast<std::int64_t>(capped);
  }

  // Poisson; Knuth multiplication below lambda=30, rounded normal above
  // (adequate here, lambdas in this codebase stay small).
  std::int64_t poisson(double lambda) {
    if (lambda < 0.0) throw RangeError("poisson: lambda must be >= 0");
    if (lambda == 0.0) return 0;
    if (lambda < 30.0) {
      const double limit = std::exp(-lambda);
      std::int64_t k = 0;
      double prod = uniform();
      while (prod > limit) {
        ++k;
        prod *= uniform();
      }
      return k;
    }
    const double x = lambda + std::sqrt(lambda) * normal();
    return static_cast<std::int64_t>(std::llround(std::max(0.0, x)));
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace resflow
