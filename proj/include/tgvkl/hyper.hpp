#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "tgvkl/admm.hpp"
#include "tgvkl/image.hpp"
#include "tgvkl/metrics.hpp"
#include "tgvkl/operators.hpp"

namespace tgvkl {

/// Gamma hyperprior with mode (k - 1) theta and variance k theta^2.
struct GammaPrior {
  double k = 2.0;
  double theta = 1.0;
};

struct HyperState {
  double alpha0 = 1.0;
  double alpha1 = 1.0;
  GammaPrior prior0;
  GammaPrior prior1;
};

/// Unique (k, theta) with theta (k - 1) = mode and sqrt(k) theta = stddev.
inline GammaPrior fit_gamma_hyperprior(double mode, double stddev) {
  if (!(mode > 0.0) || !(stddev > 0.0) || !std::isfinite(mode) || !std::isfinite(stddev)) {
    throw std::invalid_argument("fit_gamma_hyperprior: mode and stddev must be positive");
  }
  // theta^2 + m theta - s^2 = 0; the positive root written without cancellation.
  const double theta = 2.0 * stddev * stddev / (mode + std::sqrt(mode * mode + 4.0 * stddev * stddev));
  return {mode / theta + 1.0, theta};
}

/// f(alpha) = alpha * sum_norms - (n + k - 1) ln alpha + alpha / theta.
inline double alpha_objective(double alpha, double sum_norms, double n, const GammaPrior& p) {
  return alpha * sum_norms - (n + p.k - 1.0) * std::log(alpha) + alpha / p.theta;
}

/// Minimizer of alpha_objective.
inline double alpha_minimizer(double sum_norms, double n, const GammaPrior& p) {
  return (n + p.k - 1.0) / (sum_norms + 1.0 / p.theta);
}

inline VectorField2 grad_minus(const Image& u, const VectorField2& w) {
  VectorField2 g = grad(u);
  for (std::size_t p = 0; p < 2; ++p) {
    for (std::size_t k = 0; k < u.size(); ++k) g[p][k] -= w[p][k];
  }
  return g;
}

struct MlInit {
  std::optional<double> alpha0;  // empty when the mean norm is zero
  std::optional<double> alpha1;
};

/// alpha0 = n / sum |D u0 - D b|, alpha1 = n / sum |E D u0|.
inline MlInit ml_init_alphas(const Image& b, const Image& u0) {
  require_same_dims(b.dims(), u0.dims(), "ml_init_alphas");
  const double n = static_cast<double>(b.size());
  const VectorField2 du = grad(u0);
  const double s0 = grad_minus(b, du).sum_of_norms();
  const double s1 = sym_grad(du).sum_of_norms();
  MlInit r;
  if (s0 > 0.0) r.alpha0 = n / s0;
  if (s1 > 0.0) r.alpha1 = n / s1;
  return r;
}

/// Mean-norm floor substituted when an ML denominator vanishes.
inline constexpr double kMlMeanFloor = 1e-6;

inline std::pair<double, double> resolve_ml_init(const MlInit& m) {
  return {m.alpha0.value_or(1.0 / kMlMeanFloor), m.alpha1.value_or(1.0 / kMlMeanFloor)};
}

struct AlphaSums {
  double s0 = 0.0;  // sum |D u - w|
  double s1 = 0.0;  // sum |w| or sum |E w|
};

inline AlphaSums alpha_sums(const Image& u, const VectorField2& w, bool alpha1_on_symgrad) {
  return {grad_minus(u, w).sum_of_norms(),
          alpha1_on_symgrad ? sym_grad(w).sum_of_norms() : w.sum_of_norms()};
}

inline std::pair<double, double> alpha_updates(const Image& u, const VectorField2& w,
                                               const HyperState& hyper,
                                               bool alpha1_on_symgrad = false) {
  const double n = static_cast<double>(u.size());
  const AlphaSums s = alpha_sums(u, w, alpha1_on_symgrad);
  return {alpha_minimizer(s.s0, n, hyper.prior0), alpha_minimizer(s.s1, n, hyper.prior1)};
}

/// lambda KL(Au + gamma; b) + alpha0 sum|Du - w| + alpha1 sum|Ew| + gamma-prior penalties.
inline double objective_j(const TgvKlProblem& problem, const Image& u, const VectorField2& w,
                          const HyperState& h, double lambda) {
  Image y = problem.blur().apply(u);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] += problem.gamma()[k];
  const double n = static_cast<double>(u.size());
  return lambda * kl_divergence(y, problem.b()) + h.alpha0 * grad_minus(u, w).sum_of_norms() +
         h.alpha1 * sym_grad(w).sum_of_norms() - (n + h.prior0.k - 1.0) * std::log(h.alpha0) +
         h.alpha0 / h.prior0.theta - (n + h.prior1.k - 1.0) * std::log(h.alpha1) +
         h.alpha1 / h.prior1.theta;
}

struct OuterResult;

struct OuterOptions {
  int max_outer = 30;
  double tol_rel_outer = 1e-5;
  double hyper_std = 1e-3;
  bool alpha1_on_symgrad = false;
  bool full_warm_start = true;  // false: restart each inner solve from u only
  SolveOptions inner;
  // Called after the initializer and after every outer iteration with the
  // result so far, e.g. to flush a partial trace.
  std::function<void(const OuterResult&)> progress;

  void validate() const {
    if (max_outer < 1) throw std::invalid_argument("OuterOptions: max_outer must be >= 1");
    if (!(tol_rel_outer > 0.0)) throw std::invalid_argument("OuterOptions: tol_rel_outer > 0");
    if (!(hyper_std > 0.0)) throw std::invalid_argument("OuterOptions: hyper_std > 0");
    if (inner.fixed_lambda) {
      throw std::invalid_argument("OuterOptions: the outer scheme selects lambda itself");
    }
    inner.validate();
  }
};

inline RunTrace make_outer_trace() {
  return RunTrace({"outer_k", "inner_t_final", "lambda", "alpha0", "alpha1",
                   "alpha0_over_lambda", "alpha1_over_lambda", "delta_u", "isnr", "ssim"});
}

struct ObjectiveCheck {
  double previous = 0.0;  // J at iterate k-1, evaluated with lambda of iterate k
  double current = 0.0;
};

struct OuterResult {
  Image u;
  VectorField2 w;
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  double lambda = 0.0;
  HyperState hyper;
  Image u_init;  // TV-KL initializer
  double lambda_init = 0.0;
  double alpha0_init = 0.0;
  double alpha1_init = 0.0;
  bool alpha0_floored = false;
  bool alpha1_floored = false;
  int outer_iterations = 0;
  int total_inner_iterations = 0;
  bool converged = false;
  RunTrace trace;
  RunTrace inner_trace;  // all inner rows, TGV stage only
  std::vector<ObjectiveCheck> objective;
};

/// TV-KL initialization followed by alternating TGV-KL solves and alpha updates.
/// If only_init is set, returns after the initializer and ML alphas.
inline OuterResult outer_scheme(const Image& b, const Image& gamma, const BccbOperator& A,
                                const OuterOptions& opts, bool only_init = false) {
  opts.validate();
  const TgvKlProblem problem(b, gamma, A);
  const std::optional<Monitor>& mon = opts.inner.monitor;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto quality = [&](const Image& u) -> std::pair<double, double> {
    if (!mon) return {nan, nan};
    return {isnr(b, mon->truth, u), ssim(mon->truth, u, mon->dynamic_range)};
  };

  OuterResult out;
  out.trace = make_outer_trace();
  out.inner_trace = make_inner_trace();

  const TvResult tv = admm_tv_kl(b, gamma, A, opts.inner);
  out.u_init = tv.u;
  out.lambda_init = tv.lambda;
  const MlInit ml = ml_init_alphas(b, tv.u);
  out.alpha0_floored = !ml.alpha0;
  out.alpha1_floored = !ml.alpha1;
  std::tie(out.alpha0_init, out.alpha1_init) = resolve_ml_init(ml);

  HyperState h;
  h.alpha0 = out.alpha0_init;
  h.alpha1 = out.alpha1_init;
  h.prior0 = fit_gamma_hyperprior(h.alpha0, opts.hyper_std);
  h.prior1 = fit_gamma_hyperprior(h.alpha1, opts.hyper_std);

  {
    const auto [qi, qs] = quality(tv.u);
    out.trace.add_row({0.0, static_cast<double>(tv.iterations), tv.lambda, h.alpha0, h.alpha1,
                       h.alpha0 / tv.lambda, h.alpha1 / tv.lambda, nan, qi, qs});
  }
  out.u = tv.u;
  out.w = grad(tv.u);
  out.lambda = tv.lambda;
  out.alpha0 = h.alpha0;
  out.alpha1 = h.alpha1;
  out.hyper = h;
  if (opts.progress) opts.progress(out);
  if (only_init) return out;

  AdmmState state = problem.initial_state(tv.u, opts.inner.rho, tv.state.tau);
  Image u_prev = tv.u;
  VectorField2 w_prev = out.w;
  HyperState h_prev = h;
  for (int k = 1; k <= opts.max_outer; ++k) {
    TgvResult r = admm_tgv_kl(problem, h.alpha0, h.alpha1, opts.inner, std::move(state));
    out.total_inner_iterations += r.iterations;
    out.inner_trace.append(r.trace);

    const auto [a0, a1] = alpha_updates(r.u, r.w, h, opts.alpha1_on_symgrad);
    h.alpha0 = a0;
    h.alpha1 = a1;

    out.objective.push_back({objective_j(problem, u_prev, w_prev, h_prev, r.lambda),
                             objective_j(problem, r.u, r.w, h, r.lambda)});

    const double delta = detail::relative_change(r.u, u_prev);
    const auto [qi, qs] = quality(r.u);
    out.trace.add_row({static_cast<double>(k), static_cast<double>(r.iterations), r.lambda,
                       h.alpha0, h.alpha1, h.alpha0 / r.lambda, h.alpha1 / r.lambda, delta, qi,
                       qs});
    out.outer_iterations = k;
    out.u = r.u;
    out.w = r.w;
    out.lambda = r.lambda;
    out.alpha0 = h.alpha0;
    out.alpha1 = h.alpha1;
    out.hyper = h;
    if (opts.progress) opts.progress(out);

    u_prev = r.u;
    w_prev = r.w;
    h_prev = h;
    if (opts.full_warm_start) {
      state = std::move(r.state);
    } else {
      state = problem.initial_state(r.state.u, opts.inner.rho, r.state.tau);
    }
    if (delta < opts.tol_rel_outer) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace tgvkl
