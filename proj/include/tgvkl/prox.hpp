#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "tgvkl/image.hpp"
#include "tgvkl/metrics.hpp"

namespace tgvkl {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// y = z + gamma solves y^2 + p y - tau b = 0 with p = tau - q - gamma.
// Both branches avoid cancellation.
inline double shifted_root(double q, double b, double gamma, double tau, double& sqrt_disc) {
  const double p = tau - q - gamma;
  const double disc = p * p + 4.0 * tau * b;
  sqrt_disc = std::sqrt(disc);
  if (p <= 0.0) return 0.5 * (sqrt_disc - p);
  const double den = p + sqrt_disc;
  return den > 0.0 ? 2.0 * tau * b / den : 0.0;
}

inline void check_z1_inputs(double q, double b, double gamma, double tau) {
  if (!std::isfinite(q) || !std::isfinite(b) || !std::isfinite(gamma) || !std::isfinite(tau)) {
    throw std::invalid_argument("z1: non-finite input");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("z1: gamma must be positive");
  if (tau < 0.0) throw std::invalid_argument("z1: tau must be non-negative");
}

}  // namespace detail

/// argmin_z tau (z + gamma - b ln(z + gamma)) + (z - q)^2 / 2.
/// At tau = 0 the fidelity vanishes and q is returned.
inline double z1_pointwise(double q, double b, double gamma, double tau) {
  detail::check_z1_inputs(q, b, gamma, tau);
  if (tau == 0.0) return q;
  double sd = 0.0;
  return detail::shifted_root(q, b, gamma, tau, sd) - gamma;
}

/// d z1 / d tau.
inline double z1_derivative_pointwise(double q, double b, double gamma, double tau) {
  detail::check_z1_inputs(q, b, gamma, tau);
  double sd = 0.0;
  const double y = detail::shifted_root(q, b, gamma, tau, sd);
  return sd > 0.0 ? (b - y) / sd : 0.0;
}

inline Image z1_update(const Image& q, const Image& b, const Image& gamma, double tau) {
  require_same_dims(q.dims(), b.dims(), "z1_update");
  require_same_dims(q.dims(), gamma.dims(), "z1_update");
  Image out(q.dims());
  for (std::size_t k = 0; k < q.size(); ++k) out[k] = z1_pointwise(q[k], b[k], gamma[k], tau);
  return out;
}

struct DiscrepancyEval {
  double value = 0.0;
  double derivative = 0.0;
};

/// D(tau) = sum F(z_i(tau) + gamma_i; b_i) and its derivative, summed in pixel order.
inline DiscrepancyEval evaluate_discrepancy(const Image& q, const Image& b, const Image& gamma,
                                            double tau) {
  require_same_dims(q.dims(), b.dims(), "discrepancy");
  require_same_dims(q.dims(), gamma.dims(), "discrepancy");
  if (!(tau >= 0.0)) throw std::invalid_argument("discrepancy: tau must be non-negative");
  DiscrepancyEval e;
  for (std::size_t k = 0; k < q.size(); ++k) {
    detail::check_z1_inputs(q[k], b[k], gamma[k], tau);
    double y = 0.0;
    double sd = 0.0;
    if (tau == 0.0) {
      y = q[k] + gamma[k];
    } else {
      y = detail::shifted_root(q[k], b[k], gamma[k], tau, sd);
    }
    if (b[k] > 0.0 && !(y > 0.0)) {
      throw SolverError("discrepancy: non-positive z1 + gamma at pixel " + std::to_string(k));
    }
    e.value += b[k] == 0.0 ? y : kl_term(y, b[k]);
    if (tau > 0.0) {
      const double dz = sd > 0.0 ? (b[k] - y) / sd : 0.0;
      e.derivative += dz * (b[k] == 0.0 ? 1.0 : 1.0 - b[k] / y);
    }
  }
  return e;
}

inline double discrepancy_of_tau(const Image& q, const Image& b, const Image& gamma,
                                 double tau) {
  return evaluate_discrepancy(q, b, gamma, tau).value;
}

inline double discrepancy_derivative(const Image& q, const Image& b, const Image& gamma,
                                     double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("discrepancy_derivative: tau must be > 0");
  return evaluate_discrepancy(q, b, gamma, tau).derivative;
}

inline constexpr double kTauMax = 1e12;

struct TauSolveOptions {
  std::optional<double> tol_abs;  // defaults to 1e-6 * n
  int max_newton = 50;
  int max_bisection = 60;
  double tau_min = 1e-12;
  double tau_max = kTauMax;
  double tau_init = 1.0;

  void validate() const {
    if (!(tau_min > 0.0) || !(tau_max > tau_min)) {
      throw std::invalid_argument("TauSolveOptions: need 0 < tau_min < tau_max");
    }
    if (tol_abs && !(*tol_abs > 0.0)) throw std::invalid_argument("TauSolveOptions: tol_abs > 0");
    if (max_newton < 0 || max_bisection < 0) {
      throw std::invalid_argument("TauSolveOptions: iteration caps must be non-negative");
    }
    if (!(tau_init > 0.0)) throw std::invalid_argument("TauSolveOptions: tau_init > 0");
  }
};

enum class TauStatus { Converged = 0, AlreadyBelow = 1, NoRoot = 2 };

inline const char* to_string(TauStatus s) {
  switch (s) {
    case TauStatus::Converged:
      return "converged";
    case TauStatus::AlreadyBelow:
      return "already_below";
    case TauStatus::NoRoot:
      return "no_root";
  }
  return "?";
}

struct TauSolution {
  double tau = 0.0;
  TauStatus status = TauStatus::Converged;
  double discrepancy = 0.0;
  double derivative = 0.0;
  int newton_steps = 0;
  int bisection_steps = 0;
};

/// Root of D(tau) = n/2 by bracketed Newton with bisection fallback.
inline TauSolution solve_tau(const Image& q, const Image& b, const Image& gamma,
                             const TauSolveOptions& opts = {}) {
  opts.validate();
  const double n = static_cast<double>(q.size());
  const double target = 0.5 * n;
  const double tol = opts.tol_abs.value_or(1e-6 * n);
  auto eval = [&](double tau) { return evaluate_discrepancy(q, b, gamma, tau); };
  auto done = [&](double tau, const DiscrepancyEval& e, TauStatus st, int nw, int bs) {
    return TauSolution{tau, st, e.value, e.derivative, nw, bs};
  };
  // Once within tolerance, keep taking Newton steps while they still improve
  // the residual, so the returned tau does not depend on where the search began.
  auto polish = [&](double tau, DiscrepancyEval e, int nw, int bs) {
    for (int i = 0; i < 8 && e.derivative < 0.0; ++i) {
      const double step = (e.value - target) / e.derivative;
      if (!(std::fabs(step) > 1e-13 * tau)) break;
      const double next = tau - step;
      if (!(next > 0.0)) break;
      const DiscrepancyEval en = eval(next);
      if (!(std::fabs(en.value - target) < std::fabs(e.value - target))) break;
      tau = next;
      e = en;
      ++nw;
    }
    return done(tau, e, TauStatus::Converged, nw, bs);
  };

  double tau = std::clamp(opts.tau_init, opts.tau_min, opts.tau_max);
  DiscrepancyEval e = eval(tau);
  if (std::fabs(e.value - target) <= tol) return polish(tau, e, 0, 0);

  // Bracket [lo, hi] with g(lo) > 0 > g(hi), g = D - n/2 nonincreasing.
  double lo = tau;
  double hi = tau;
  DiscrepancyEval elo = e;
  DiscrepancyEval ehi = e;
  if (e.value > target) {
    while (true) {
      if (hi >= opts.tau_max) return done(opts.tau_max, ehi, TauStatus::NoRoot, 0, 0);
      lo = hi;
      elo = ehi;
      hi = std::min(2.0 * hi, opts.tau_max);
      ehi = eval(hi);
      if (std::fabs(ehi.value - target) <= tol) return polish(hi, ehi, 0, 0);
      if (ehi.value < target) break;
    }
  } else {
    while (true) {
      if (lo <= opts.tau_min) return done(opts.tau_min, elo, TauStatus::AlreadyBelow, 0, 0);
      hi = lo;
      ehi = elo;
      lo = std::max(0.5 * lo, opts.tau_min);
      elo = eval(lo);
      if (std::fabs(elo.value - target) <= tol) return polish(lo, elo, 0, 0);
      if (elo.value > target) break;
    }
  }

  // Newton from the endpoint closer to the root in function value.
  bool from_lo = (elo.value - target) < (target - ehi.value);
  tau = from_lo ? lo : hi;
  e = from_lo ? elo : ehi;
  int newton = 0;
  int bisect = 0;
  while (true) {
    double next = 0.0;
    bool use_newton = false;
    if (newton < opts.max_newton && e.derivative < 0.0) {
      next = tau - (e.value - target) / e.derivative;
      use_newton = next > lo && next < hi && std::isfinite(next);
    }
    if (use_newton) {
      ++newton;
    } else {
      if (bisect >= opts.max_bisection) {
        throw SolverError("solve_tau: no convergence after " + std::to_string(newton) +
                          " Newton steps and " + std::to_string(bisect) + " bisections");
      }
      ++bisect;
      next = hi > 4.0 * lo ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    }
    tau = next;
    e = eval(tau);
    const double g = e.value - target;
    if (std::fabs(g) <= tol) return polish(tau, e, newton, bisect);
    if (g > 0.0) {
      lo = tau;
    } else {
      hi = tau;
    }
    if (!(hi > lo) || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      throw SolverError("solve_tau: bracket collapsed at tau = " + std::to_string(tau) +
                        " with residual " + std::to_string(g));
    }
  }
}

/// Per-pixel group soft-thresholding: max(1 - t/|q_i|, 0) q_i.
template <std::size_t N>
VectorField<N> group_shrink(const VectorField<N>& q, double threshold) {
  if (!(threshold >= 0.0)) throw std::invalid_argument("group_shrink: threshold must be >= 0");
  VectorField<N> out(q.dims());
  for (std::size_t k = 0; k < q.pixel_count(); ++k) {
    const double norm = q.norm_at(k);
    if (norm <= threshold) continue;
    const double f = 1.0 - threshold / norm;
    for (std::size_t p = 0; p < N; ++p) out[p][k] = f * q[p][k];
  }
  return out;
}

inline VectorField2 z2_update(const VectorField2& q, double alpha0, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("z2_update: rho must be positive");
  return group_shrink(q, alpha0 / rho);
}

inline VectorField4 z3_update(const VectorField4& q, double alpha1, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("z3_update: rho must be positive");
  return group_shrink(q, alpha1 / rho);
}

inline Image z4_update(const Image& q) {
  Image out = q;
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

}  // namespace tgvkl
