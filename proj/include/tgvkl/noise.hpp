#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "tgvkl/image.hpp"
#include "tgvkl/operators.hpp"

namespace tgvkl {

/// 64-bit Mersenne Twister (19937-bit state). Uniform variates are built
/// from the raw 64-bit output so draws are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

namespace detail {

inline long long poisson_inversion(double mean, Rng& rng) {
  const double u = rng.uniform_open();
  double p = std::exp(-mean);
  double cdf = p;
  long long k = 0;
  // For mean < 30 the tail beyond 200 carries far less mass than 2^-53.
  while (u > cdf && k < 200) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Transformed rejection with squeeze (Hormann 1993, "PTRS").
inline long long poisson_ptrs(double mean, Rng& rng) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    const double u = rng.uniform_open() - 0.5;
    const double v = rng.uniform_open();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<long long>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    const double lhs = std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b);
    const double rhs = -mean + k * loglam - std::lgamma(k + 1.0);
    if (lhs <= rhs) return static_cast<long long>(k);
  }
}

}  // namespace detail

/// Below this mean the sampler inverts the CDF by sequential search;
/// at or above it uses transformed rejection.
inline constexpr double kPoissonInversionLimit = 30.0;

inline long long poisson_sample(double mean, Rng& rng) {
  if (!std::isfinite(mean) || mean < 0.0) {
    throw std::invalid_argument("poisson_sample: mean must be finite and non-negative");
  }
  if (mean == 0.0) return 0;
  if (mean < kPoissonInversionLimit) return detail::poisson_inversion(mean, rng);
  return detail::poisson_ptrs(mean, rng);
}

struct DegradeConfig {
  double kappa = 50.0;
  double gamma = 2e-3;
  int band = 5;
  double sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
      throw std::invalid_argument("kappa must be positive");
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw std::invalid_argument("gamma must be positive");
    }
    if (band < 1 || band % 2 == 0) throw std::invalid_argument("band must be odd and positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  }
};

struct Degraded {
  Image b;  // counts
  Image y;  // A(kappa * clean) + gamma
};

/// y = A(kappa * clean) + gamma, b ~ Poisson(y) drawn in row-major order.
inline Degraded degrade(const Image& clean, const BccbOperator& blur, const DegradeConfig& cfg) {
  cfg.validate();
  for (double v : clean) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("degrade: clean image must lie in [0, 1]");
    }
  }
  Image y = blur.apply(scaled(clean, cfg.kappa));
  for (double& v : y) v = std::max(v, 0.0) + cfg.gamma;
  Rng rng(cfg.seed);
  Image b(y.dims());
  for (std::size_t k = 0; k < y.size(); ++k) {
    b[k] = static_cast<double>(poisson_sample(y[k], rng));
  }
  return {std::move(b), std::move(y)};
}

inline Degraded degrade(const Image& clean, const DegradeConfig& cfg) {
  cfg.validate();
  return degrade(clean, BccbOperator(gaussian_psf(cfg.band, cfg.sigma), clean.dims()), cfg);
}

}  // namespace tgvkl
