#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tgvkl/image.hpp"

namespace tgvkl {

/// F(y; b) = y - b ln y + b ln b - b, with b ln b = 0 at b = 0.
inline double kl_term(double y, double b) {
  if (b == 0.0) return y;
  return y - b * std::log(y) + b * std::log(b) - b;
}

inline double kl_divergence(const Image& y, const Image& b) {
  require_same_dims(y.dims(), b.dims(), "kl_divergence");
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (!(y[k] > 0.0)) {
      throw std::domain_error("kl_divergence: y must be strictly positive (pixel " +
                              std::to_string(k) + ")");
    }
    s += kl_term(y[k], b[k]);
  }
  return s;
}

/// 10 log10(|b - u|^2 / |est - u|^2); +inf when est == u.
inline double isnr(const Image& b, const Image& truth, const Image& est) {
  const double num = squared_distance(b, truth);
  const double den = squared_distance(est, truth);
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

namespace detail {

inline std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double x = i - c;
    g[static_cast<std::size_t>(i)] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable filtering over windows lying fully inside the image.
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t rows,
                                        std::size_t cols, const std::vector<double>& taps) {
  const std::size_t w = taps.size();
  const std::size_t orows = rows - w + 1;
  const std::size_t ocols = cols - w + 1;
  std::vector<double> tmp(rows * ocols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < ocols; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < w; ++t) s += taps[t] * img[i * cols + j + t];
      tmp[i * ocols + j] = s;
    }
  }
  std::vector<double> out(orows * ocols, 0.0);
  for (std::size_t i = 0; i < orows; ++i) {
    for (std::size_t j = 0; j < ocols; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < w; ++t) s += taps[t] * tmp[(i + t) * ocols + j];
      out[i * ocols + j] = s;
    }
  }
  return out;
}

}  // namespace detail

/// Mean local SSIM over all windows that fit in the image. The window is
/// shrunk (keeping it odd) when the image is smaller than it.
inline double ssim(const Image& truth, const Image& est, double dynamic_range,
                   const SsimParams& params = {}) {
  require_same_dims(truth.dims(), est.dims(), "ssim");
  if (!(dynamic_range > 0.0)) throw std::invalid_argument("ssim: dynamic_range must be > 0");
  const std::size_t rows = truth.rows();
  const std::size_t cols = truth.cols();
  int win = params.window;
  win = std::min<int>(win, static_cast<int>(std::min(rows, cols)));
  if (win % 2 == 0) --win;
  const auto taps = detail::gaussian_taps(win, params.sigma);

  const std::size_t n = truth.size();
  std::vector<double> x(truth.begin(), truth.end());
  std::vector<double> y(est.begin(), est.end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t k = 0; k < n; ++k) {
    xx[k] = x[k] * x[k];
    yy[k] = y[k] * y[k];
    xy[k] = x[k] * y[k];
  }
  const auto mx = detail::filter_valid(x, rows, cols, taps);
  const auto my = detail::filter_valid(y, rows, cols, taps);
  const auto sxx = detail::filter_valid(xx, rows, cols, taps);
  const auto syy = detail::filter_valid(yy, rows, cols, taps);
  const auto sxy = detail::filter_valid(xy, rows, cols, taps);

  const double c1 = (params.k1 * dynamic_range) * (params.k1 * dynamic_range);
  const double c2 = (params.k2 * dynamic_range) * (params.k2 * dynamic_range);
  double total = 0.0;
  for (std::size_t k = 0; k < mx.size(); ++k) {
    const double vx = sxx[k] - mx[k] * mx[k];
    const double vy = syy[k] - my[k] * my[k];
    const double cov = sxy[k] - mx[k] * my[k];
    total += ((2.0 * mx[k] * my[k] + c1) * (2.0 * cov + c2)) /
             ((mx[k] * mx[k] + my[k] * my[k] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace tgvkl
