#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "tgvkl/fft.hpp"
#include "tgvkl/image.hpp"
#include "tgvkl/metrics.hpp"
#include "tgvkl/operators.hpp"
#include "tgvkl/prox.hpp"
#include "tgvkl/trace.hpp"

namespace tgvkl {

/// An element of the constraint space of H = [A 0; D -I; 0 E; I 0].
struct StackedField {
  Image v1;
  VectorField2 v2;
  VectorField4 v3;
  Image v4;

  StackedField() = default;
  explicit StackedField(Dims d) : v1(d), v2(d), v3(d), v4(d) {}
  StackedField(Image a, VectorField2 b, VectorField4 c, Image d)
      : v1(std::move(a)), v2(std::move(b)), v3(std::move(c)), v4(std::move(d)) {}

  [[nodiscard]] Dims dims() const noexcept { return v1.dims(); }

  /// Calls f(this_plane, other_plane) over all 8 planes.
  template <class F>
  void zip(const StackedField& o, F&& f) {
    f(v1, o.v1);
    for (std::size_t p = 0; p < 2; ++p) f(v2[p], o.v2[p]);
    for (std::size_t p = 0; p < 4; ++p) f(v3[p], o.v3[p]);
    f(v4, o.v4);
  }

  /// this += s * o
  void add_scaled(const StackedField& o, double s) {
    zip(o, [s](Image& a, const Image& b) {
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += s * b[k];
    });
  }

  [[nodiscard]] double squared_norm() const {
    return tgvkl::squared_norm(v1) + tgvkl::squared_norm(v2) + tgvkl::squared_norm(v3) +
           tgvkl::squared_norm(v4);
  }
};

inline bool operator==(const StackedField& a, const StackedField& b) {
  return a.v1 == b.v1 && a.v2 == b.v2 && a.v3 == b.v3 && a.v4 == b.v4;
}

struct AdmmState {
  Image u;
  VectorField2 w;
  StackedField z;     // (z1, z2, z3, z4)
  StackedField zeta;  // multipliers, same shapes as z
  double rho = 0.1;
  double tau = 1.0;   // lambda / rho
  int iteration = 0;
};

/// Ground truth for per-iteration quality logging.
struct Monitor {
  Image truth;
  double dynamic_range = 1.0;
  int ssim_every = 0;  // 0: SSIM only on the final inner row
};

struct SolveOptions {
  double tol_rel = 1e-5;
  int max_inner = 2000;
  double rho = 0.1;
  TauSolveOptions tau;
  std::optional<double> fixed_lambda;
  bool record_trace = true;
  std::optional<Monitor> monitor;

  void validate() const {
    if (!(tol_rel > 0.0)) throw std::invalid_argument("SolveOptions: tol_rel must be positive");
    if (max_inner < 0) throw std::invalid_argument("SolveOptions: max_inner must be >= 0");
    if (!(rho > 0.0)) throw std::invalid_argument("SolveOptions: rho must be positive");
    if (fixed_lambda && !(*fixed_lambda > 0.0)) {
      throw std::invalid_argument("SolveOptions: fixed lambda must be positive");
    }
    tau.validate();
  }
};

inline RunTrace make_inner_trace() {
  return RunTrace({"t", "lambda", "discrepancy", "residual", "delta_u", "isnr", "ssim",
                   "tau_status"});
}

struct XSolution {
  Image u;
  VectorField2 w;
  Image au;  // A u, reused by the caller
};

namespace detail {

inline double relative_change(const Image& now, const Image& before) {
  const double d = std::sqrt(squared_distance(now, before));
  const double ref = std::sqrt(squared_norm(before));
  return ref > 0.0 ? d / ref : d;
}

inline void check_problem_inputs(const Image& b, const Image& gamma, const BccbOperator& A) {
  require_same_dims(b.dims(), gamma.dims(), "admm: gamma");
  require_same_dims(b.dims(), A.dims(), "admm: operator");
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (!(b[k] >= 0.0) || !std::isfinite(b[k])) {
      throw std::invalid_argument("admm: b must be finite and non-negative");
    }
    if (!(gamma[k] > 0.0) || !std::isfinite(gamma[k])) {
      throw std::invalid_argument("admm: gamma must be positive");
    }
  }
}

struct StepReport {
  double lambda;
  double discrepancy;
  TauStatus status;
};

inline StepReport update_z1(const Image& q1, const Image& b, const Image& gamma,
                            const SolveOptions& opts, double rho, double& tau, Image& z1) {
  StepReport r{};
  if (opts.fixed_lambda) {
    tau = *opts.fixed_lambda / rho;
    r.discrepancy = discrepancy_of_tau(q1, b, gamma, tau);
    r.status = TauStatus::Converged;
  } else {
    TauSolveOptions t = opts.tau;
    t.tau_init = std::clamp(tau, t.tau_min, t.tau_max);
    const TauSolution s = solve_tau(q1, b, gamma, t);
    tau = s.tau;
    r.discrepancy = s.discrepancy;
    r.status = s.status;
  }
  r.lambda = tau * rho;
  z1 = z1_update(q1, b, gamma, tau);
  return r;
}

inline void log_inner_row(RunTrace& trace, const SolveOptions& opts, const Image& b,
                          const Image& u, int t, const StepReport& r, double residual,
                          double delta, bool final_row) {
  if (!opts.record_trace) return;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double q_isnr = nan;
  double q_ssim = nan;
  if (opts.monitor) {
    q_isnr = isnr(b, opts.monitor->truth, u);
    const int every = opts.monitor->ssim_every;
    if (final_row || (every > 0 && t % every == 0)) {
      q_ssim = ssim(opts.monitor->truth, u, opts.monitor->dynamic_range);
    }
  }
  trace.add_row({static_cast<double>(t), r.lambda, r.discrepancy, residual, delta, q_isnr,
                 q_ssim, static_cast<double>(static_cast<int>(r.status))});
}

}  // namespace detail

/// Data, blur and cached spectra for repeated TGV-KL solves on one grid.
class TgvKlProblem {
 public:
  TgvKlProblem(Image b, Image gamma, BccbOperator A)
      : b_(std::move(b)), gamma_(std::move(gamma)), a_(std::move(A)), system_(make_system(a_)) {
    detail::check_problem_inputs(b_, gamma_, a_);
  }

  [[nodiscard]] const Image& b() const noexcept { return b_; }
  [[nodiscard]] const Image& gamma() const noexcept { return gamma_; }
  [[nodiscard]] const BccbOperator& blur() const noexcept { return a_; }
  [[nodiscard]] const FourierSystem& system() const noexcept { return system_; }
  [[nodiscard]] Dims dims() const noexcept { return b_.dims(); }

  [[nodiscard]] StackedField apply_h(const Image& u, const VectorField2& w) const {
    return apply_h(u, w, a_.apply(u));
  }

  [[nodiscard]] StackedField apply_h(const Image& u, const VectorField2& w, Image au) const {
    VectorField2 dw = grad(u);
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t k = 0; k < u.size(); ++k) dw[p][k] -= w[p][k];
    }
    return StackedField(std::move(au), std::move(dw), sym_grad(w), u);
  }

  /// (A^T v1 + D^T v2 + v4, -v2 + E^T v3)
  [[nodiscard]] std::pair<Image, VectorField2> apply_h_adjoint(const StackedField& v) const {
    Image ru = a_.apply_adjoint(v.v1);
    const Image dt = grad_adjoint(v.v2);
    for (std::size_t k = 0; k < ru.size(); ++k) ru[k] += dt[k] + v.v4[k];
    VectorField2 rw = sym_grad_adjoint(v.v3);
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t k = 0; k < ru.size(); ++k) rw[p][k] -= v.v2[p][k];
    }
    return {std::move(ru), std::move(rw)};
  }

  /// Exact minimizer of |Hx - v|^2 via the per-frequency normal equations.
  [[nodiscard]] XSolution x_subproblem(const StackedField& v) const {
    const Fft2& fft = a_.fft();
    const ComplexPlane& a = a_.spectrum();
    // The A^T v1 term is applied in the frequency domain.
    Image rest = grad_adjoint(v.v2);
    for (std::size_t k = 0; k < rest.size(); ++k) rest[k] += v.v4[k];
    VectorField2 rw = sym_grad_adjoint(v.v3);
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t k = 0; k < rest.size(); ++k) rw[p][k] -= v.v2[p][k];
    }
    ComplexPlane r0 = fft.forward(v.v1);
    const ComplexPlane rr = fft.forward(rest);
    for (std::size_t f = 0; f < r0.size(); ++f) r0[f] = std::conj(a[f]) * r0[f] + rr[f];
    ComplexPlane r1 = fft.forward(rw[0]);
    ComplexPlane r2 = fft.forward(rw[1]);
    system_.solve(r0, r1, r2);
    ComplexPlane au = r0;
    for (std::size_t f = 0; f < au.size(); ++f) au[f] *= a[f];
    XSolution x;
    x.u = fft.inverse_real(std::move(r0));
    x.w = VectorField2({fft.inverse_real(std::move(r1)), fft.inverse_real(std::move(r2))});
    x.au = fft.inverse_real(std::move(au));
    return x;
  }

  /// u = u0, w = D u0, z = H x with z4 projected, zeta = 0.
  [[nodiscard]] AdmmState initial_state(const Image& u0, double rho, double tau) const {
    require_same_dims(u0.dims(), dims(), "initial_state");
    AdmmState s;
    s.u = u0;
    s.w = grad(u0);
    s.z = apply_h(s.u, s.w);
    s.z.v4 = z4_update(s.z.v4);
    s.zeta = StackedField(dims());
    s.rho = rho;
    s.tau = tau;
    s.iteration = 0;
    return s;
  }

 private:
  static FourierSystem make_system(const BccbOperator& A) {
    const auto [dh, dv] = difference_operators(A.dims());
    return FourierSystem(A.spectrum(), dh.spectrum(), dv.spectrum());
  }

  Image b_;
  Image gamma_;
  BccbOperator a_;
  FourierSystem system_;
};

struct TgvResult {
  Image u;  // non-negative restored image
  VectorField2 w;
  double lambda = 0.0;
  double discrepancy = 0.0;
  TauStatus tau_status = TauStatus::Converged;
  int iterations = 0;
  bool converged = false;
  AdmmState state;
  RunTrace trace;
};

/// Inner ADMM for the TGV-KL model with lambda chosen at every iteration so
/// that the discrepancy of z1 equals n/2 (or held fixed on request).
inline TgvResult admm_tgv_kl(const TgvKlProblem& problem, double alpha0, double alpha1,
                             const SolveOptions& opts,
                             std::optional<AdmmState> init = std::nullopt) {
  opts.validate();
  if (!(alpha0 > 0.0) || !(alpha1 > 0.0)) {
    throw std::invalid_argument("admm_tgv_kl: alphas must be positive");
  }
  const Image& b = problem.b();
  const Image& gamma = problem.gamma();
  AdmmState s = init ? std::move(*init) : problem.initial_state(b, opts.rho, opts.tau.tau_init);
  s.rho = opts.rho;
  require_same_dims(s.u.dims(), problem.dims(), "admm_tgv_kl: state");
  const double rho = s.rho;

  TgvResult res;
  res.trace = make_inner_trace();
  detail::StepReport last{s.tau * rho, std::numeric_limits<double>::quiet_NaN(),
                          TauStatus::Converged};
  if (opts.fixed_lambda) last.lambda = *opts.fixed_lambda;
  int t_local = 0;
  while (t_local < opts.max_inner) {
    StackedField v = s.z;
    v.add_scaled(s.zeta, -1.0 / rho);
    XSolution x = problem.x_subproblem(v);
    if (!all_finite(x.u)) {
      throw SolverError("admm_tgv_kl: non-finite iterate at inner iteration " +
                        std::to_string(s.iteration + 1));
    }
    StackedField hx = problem.apply_h(x.u, x.w, std::move(x.au));
    StackedField q = hx;
    q.add_scaled(s.zeta, 1.0 / rho);

    last = detail::update_z1(q.v1, b, gamma, opts, rho, s.tau, s.z.v1);
    s.z.v2 = z2_update(q.v2, alpha0, rho);
    s.z.v3 = z3_update(q.v3, alpha1, rho);
    s.z.v4 = z4_update(q.v4);

    StackedField r = hx;
    r.add_scaled(s.z, -1.0);
    s.zeta.add_scaled(r, rho);

    const double delta = detail::relative_change(x.u, s.u);
    s.u = std::move(x.u);
    s.w = std::move(x.w);
    ++s.iteration;
    ++t_local;
    // From z = Hx, zeta = 0 the first x-step reproduces x exactly.
    const bool stop = t_local >= 2 && delta < opts.tol_rel;
    detail::log_inner_row(res.trace, opts, b, s.u, s.iteration, last,
                          std::sqrt(r.squared_norm()), delta, stop || t_local == opts.max_inner);
    if (stop) {
      res.converged = true;
      break;
    }
  }
  res.iterations = t_local;
  res.lambda = last.lambda;
  res.discrepancy = last.discrepancy;
  res.tau_status = last.status;
  res.u = z4_update(s.u);
  res.w = s.w;
  res.state = std::move(s);
  return res;
}

inline TgvResult admm_tgv_kl(const Image& b, const Image& gamma, const BccbOperator& A,
                             double alpha0, double alpha1, const SolveOptions& opts,
                             std::optional<AdmmState> init = std::nullopt) {
  return admm_tgv_kl(TgvKlProblem(b, gamma, A), alpha0, alpha1, opts, std::move(init));
}

// ---------------------------------------------------------------------------
// TV-KL: splitting z1 = Au, z2 = Du, z4 = u with unit TV weight.

struct TvState {
  Image u;
  Image z1, z4, zeta1, zeta4;
  VectorField2 z2, zeta2;
  double rho = 0.1;
  double tau = 1.0;
  int iteration = 0;
};

struct TvResult {
  Image u;
  double lambda = 0.0;
  double discrepancy = 0.0;
  TauStatus tau_status = TauStatus::Converged;
  int iterations = 0;
  bool converged = false;
  TvState state;
  RunTrace trace;
};

inline TvResult admm_tv_kl(const Image& b, const Image& gamma, const BccbOperator& A,
                           const SolveOptions& opts) {
  opts.validate();
  detail::check_problem_inputs(b, gamma, A);
  const Dims d = b.dims();
  const double rho = opts.rho;
  const auto [dh, dv] = difference_operators(d);
  const ScalarFourierSystem system(A.spectrum(), dh.spectrum(), dv.spectrum());
  const Fft2& fft = A.fft();
  const ComplexPlane& a = A.spectrum();

  TvState s;
  s.u = b;
  s.z1 = A.apply(b);
  s.z2 = grad(b);
  s.z4 = z4_update(b);
  s.zeta1 = Image(d);
  s.zeta2 = VectorField2(d);
  s.zeta4 = Image(d);
  s.rho = rho;
  s.tau = opts.tau.tau_init;

  TvResult res;
  res.trace = make_inner_trace();
  detail::StepReport last{s.tau * rho, std::numeric_limits<double>::quiet_NaN(),
                          TauStatus::Converged};
  int t_local = 0;
  while (t_local < opts.max_inner) {
    // v = z - zeta / rho; u solves (A^T A + D^T D + I) u = A^T v1 + D^T v2 + v4.
    Image v1 = s.z1;
    Image v4 = s.z4;
    VectorField2 v2 = s.z2;
    for (std::size_t k = 0; k < v1.size(); ++k) {
      v1[k] -= s.zeta1[k] / rho;
      v4[k] -= s.zeta4[k] / rho;
      v2[0][k] -= s.zeta2[0][k] / rho;
      v2[1][k] -= s.zeta2[1][k] / rho;
    }
    Image rest = grad_adjoint(v2);
    for (std::size_t k = 0; k < rest.size(); ++k) rest[k] += v4[k];
    ComplexPlane r = fft.forward(v1);
    const ComplexPlane rr = fft.forward(rest);
    for (std::size_t f = 0; f < r.size(); ++f) r[f] = std::conj(a[f]) * r[f] + rr[f];
    system.solve(r);
    ComplexPlane au_hat = r;
    for (std::size_t f = 0; f < r.size(); ++f) au_hat[f] *= a[f];
    Image u = fft.inverse_real(std::move(r));
    if (!all_finite(u)) {
      throw SolverError("admm_tv_kl: non-finite iterate at inner iteration " +
                        std::to_string(s.iteration + 1));
    }
    const Image au = fft.inverse_real(std::move(au_hat));
    const VectorField2 du = grad(u);

    Image q1 = au;
    Image q4 = u;
    VectorField2 q2 = du;
    for (std::size_t k = 0; k < u.size(); ++k) {
      q1[k] += s.zeta1[k] / rho;
      q4[k] += s.zeta4[k] / rho;
      q2[0][k] += s.zeta2[0][k] / rho;
      q2[1][k] += s.zeta2[1][k] / rho;
    }
    last = detail::update_z1(q1, b, gamma, opts, rho, s.tau, s.z1);
    s.z2 = group_shrink(q2, 1.0 / rho);
    s.z4 = z4_update(q4);

    double res2 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double r1 = au[k] - s.z1[k];
      const double r4 = u[k] - s.z4[k];
      const double r2a = du[0][k] - s.z2[0][k];
      const double r2b = du[1][k] - s.z2[1][k];
      s.zeta1[k] += rho * r1;
      s.zeta4[k] += rho * r4;
      s.zeta2[0][k] += rho * r2a;
      s.zeta2[1][k] += rho * r2b;
      res2 += r1 * r1 + r4 * r4 + r2a * r2a + r2b * r2b;
    }

    const double delta = detail::relative_change(u, s.u);
    s.u = std::move(u);
    ++s.iteration;
    ++t_local;
    // From z = Hx, zeta = 0 the first x-step reproduces x exactly.
    const bool stop = t_local >= 2 && delta < opts.tol_rel;
    detail::log_inner_row(res.trace, opts, b, s.u, s.iteration, last, std::sqrt(res2), delta,
                          stop || t_local == opts.max_inner);
    if (stop) {
      res.converged = true;
      break;
    }
  }
  res.iterations = t_local;
  res.lambda = last.lambda;
  res.discrepancy = last.discrepancy;
  res.tau_status = last.status;
  res.u = z4_update(s.u);
  res.state = std::move(s);
  return res;
}

}  // namespace tgvkl
