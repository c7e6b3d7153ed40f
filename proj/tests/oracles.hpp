#pragma once

// Brute-force minimization oracles. None of them call the closed forms in
// the library; each minimizes the defining objective numerically.

#include <cmath>
#include <functional>
#include <vector>

#include "tgvkl/tgvkl.hpp"

namespace oracle {

/// Golden-section search on [lo, hi] for a convex function, driven by a
/// comparison diff(c, d) = f(c) - f(d) that the caller evaluates without
/// cancellation so the bracket can shrink to rounding level.
inline double golden_by_difference(const std::function<double(double, double)>& diff, double lo,
                                   double hi) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  for (int i = 0; i < 400; ++i) {
    if (!(b - a > 4e-16 * (std::fabs(a) + std::fabs(b)) + 1e-300)) break;
    if (diff(c, d) < 0.0) {
      b = d;
      d = c;
      c = b - g * (b - a);
    } else {
      a = c;
      c = d;
      d = a + g * (b - a);
    }
  }
  return 0.5 * (a + b);
}

/// argmin_z tau (z + gamma - b ln(z + gamma)) + (z - q)^2 / 2 over z > -gamma.
inline double z1(double q, double b, double gamma, double tau) {
  if (tau == 0.0) return q;
  // f(c) - f(d), with the log ratio through log1p.
  auto diff = [&](double c, double d) {
    const double h = c - d;
    double logterm = 0.0;
    if (b > 0.0) logterm = b * std::log1p(h / (d + gamma));
    return tau * (h - logterm) + h * (0.5 * (c + d) - q);
  };
  // Any minimizer lies between q and b - gamma, and above -gamma.
  const double lo = std::max(std::min(q, b - gamma), -gamma);
  const double hi = std::max(q, b - gamma);
  if (hi <= lo) return lo;
  return golden_by_difference(diff, lo, hi);
}

/// argmin_z t |z| + |z - q|^2 / 2 in R^N. Radial golden search along q, then
/// the candidate must survive random probes in every direction.
struct ShrinkOracle {
  std::vector<double> z;
  bool probes_ok = true;
};

inline ShrinkOracle shrink(const std::vector<double>& q, double t, tgvkl::Rng& rng) {
  const std::size_t n = q.size();
  double nq = 0.0;
  for (double v : q) nq += v * v;
  nq = std::sqrt(nq);
  auto objective = [&](const std::vector<double>& z) {
    double nz = 0.0;
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nz += z[i] * z[i];
      d2 += (z[i] - q[i]) * (z[i] - q[i]);
    }
    return t * std::sqrt(nz) + 0.5 * d2;
  };
  ShrinkOracle out;
  out.z.assign(n, 0.0);
  if (nq > 0.0) {
    // Along the ray z = s q / |q| the objective is t s + (s - |q|)^2 / 2.
    auto diff = [&](double c, double d) { return (c - d) * (t + 0.5 * (c + d) - nq); };
    const double s = golden_by_difference(diff, 0.0, nq);
    for (std::size_t i = 0; i < n; ++i) out.z[i] = s * q[i] / nq;
  }
  const double f0 = objective(out.z);
  for (int p = 0; p < 64; ++p) {
    std::vector<double> z = out.z;
    const double step = 1e-4 * (1.0 + nq);
    for (double& v : z) v += step * (2.0 * rng.uniform_open() - 1.0);
    if (objective(z) < f0 - 1e-12 * (1.0 + std::fabs(f0))) out.probes_ok = false;
  }
  return out;
}

/// argmin_alpha alpha S - c ln alpha + alpha / theta with c = n + k - 1.
inline double alpha(double sum_norms, double n, const tgvkl::GammaPrior& p) {
  const double c = n + p.k - 1.0;
  const double slope = sum_norms + 1.0 / p.theta;
  auto diff = [&](double a, double b) { return (a - b) * slope - c * std::log1p((a - b) / b); };
  // Bracket the minimizer by doubling from 1.
  double hi = 1.0;
  while (diff(2.0 * hi, hi) < 0.0) hi *= 2.0;
  double lo = hi;
  while (diff(0.5 * lo, lo) < 0.0) lo *= 0.5;
  return golden_by_difference(diff, 0.5 * lo, 2.0 * hi);
}

/// Pure bisection for D(tau) = n/2 on [lo, hi], D nonincreasing.
inline double tau_bisection(const tgvkl::Image& q, const tgvkl::Image& b,
                            const tgvkl::Image& gamma, double lo, double hi) {
  const double target = 0.5 * static_cast<double>(q.size());
  for (int i = 0; i < 200; ++i) {
    const double mid = hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (tgvkl::discrepancy_of_tau(q, b, gamma, mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
