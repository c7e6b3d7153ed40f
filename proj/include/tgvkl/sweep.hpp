#pragma once

// Fixed-lambda sweep of the discrepancy KL(Au + gamma; b) for given alphas.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tgvkl/admm.hpp"
#include "tgvkl/metrics.hpp"

namespace tgvkl {

struct SweepPoint {
  double lambda = 0.0;
  double discrepancy = 0.0;
  Image u;
};

/// Solves once per lambda in ascending order, warm-starting each solve from
/// the previous state. opts.fixed_lambda is overwritten.
inline std::vector<SweepPoint> discrepancy_sweep(const TgvKlProblem& problem, double alpha0,
                                                 double alpha1, std::vector<double> lambdas,
                                                 SolveOptions opts) {
  if (lambdas.empty()) throw std::invalid_argument("discrepancy_sweep: empty grid");
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw std::invalid_argument("discrepancy_sweep: lambdas must be positive");
    }
  }
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  std::vector<SweepPoint> out;
  out.reserve(lambdas.size());
  std::optional<AdmmState> state;
  for (double lambda : lambdas) {
    opts.fixed_lambda = lambda;
    TgvResult r = admm_tgv_kl(problem, alpha0, alpha1, opts, std::move(state));
    state = std::move(r.state);
    Image y = problem.blur().apply(r.u);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += problem.gamma()[k];
    out.push_back({lambda, kl_divergence(y, problem.b()), std::move(r.u)});
  }
  return out;
}

/// Log-spaced grid of `count` values from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw std::invalid_argument("log_grid: need 0 < lo <= hi and count >= 1");
  }
  std::vector<double> g;
  for (int k = 0; k < count; ++k) {
    const double t = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    g.push_back(lo * std::pow(hi / lo, t));
  }
  return g;
}

struct Crossing {
  int sign_changes = 0;
  std::optional<double> lambda;  // first crossing, log-linear interpolation
};

inline Crossing find_crossing(const std::vector<SweepPoint>& rows, double level) {
  Crossing c;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double g0 = rows[k - 1].discrepancy - level;
    const double g1 = rows[k].discrepancy - level;
    if ((g0 > 0.0) == (g1 > 0.0)) continue;
    ++c.sign_changes;
    if (!c.lambda) {
      const double t = g0 / (g0 - g1);
      c.lambda = std::exp(std::log(rows[k - 1].lambda) +
                          t * std::log(rows[k].lambda / rows[k - 1].lambda));
    }
  }
  return c;
}

}  // namespace tgvkl
