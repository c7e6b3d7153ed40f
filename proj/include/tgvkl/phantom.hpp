#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tgvkl/image.hpp"

namespace tgvkl {

namespace detail {

// Piecewise smooth test object on [-1, 1]^2 (x to the right, y downward):
// a ramped ellipse, a rotated quadratic bump, a bright bar, a dark hole and a
// small bright disk on a dim sloped background.
inline double phantom_value(double x, double y) {
  double v = 0.1 + 0.04 * (y + 1.0) / 2.0;
  const double outer = (x / 0.86) * (x / 0.86) + (y / 0.93) * (y / 0.93);
  if (outer <= 1.0) v = 0.22 + 0.18 * (x + 1.0) / 2.0 + 0.08 * (y + 1.0) / 2.0;

  const double ang = 20.0 * 3.14159265358979323846 / 180.0;
  const double xr = (x + 0.25) * std::cos(ang) + (y - 0.12) * std::sin(ang);
  const double yr = -(x + 0.25) * std::sin(ang) + (y - 0.12) * std::cos(ang);
  const double r2 = (xr / 0.34) * (xr / 0.34) + (yr / 0.52) * (yr / 0.52);
  if (r2 <= 1.0) v = 0.5 + 0.35 * (1.0 - r2);

  if (x >= 0.22 && x <= 0.62 && y >= -0.62 && y <= -0.22) v = 0.9;

  if ((x - 0.42) * (x - 0.42) + (y - 0.48) * (y - 0.48) <= 0.17 * 0.17) v = 0.04;

  if ((x + 0.5) * (x + 0.5) + (y + 0.52) * (y + 0.52) <= 0.09 * 0.09) v = 1.0;
  return v;
}

}  // namespace detail

/// Renders the test phantom on a size x size grid with 4x4 supersampling.
inline Image make_phantom(std::size_t size) {
  if (size == 0) throw std::invalid_argument("make_phantom: size must be positive");
  constexpr int ss = 4;
  Image img(size, size);
  const double h = 2.0 / static_cast<double>(size);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      double acc = 0.0;
      for (int a = 0; a < ss; ++a) {
        for (int c = 0; c < ss; ++c) {
          const double y = -1.0 + (static_cast<double>(i) + (a + 0.5) / ss) * h;
          const double x = -1.0 + (static_cast<double>(j) + (c + 0.5) / ss) * h;
          acc += detail::phantom_value(x, y);
        }
      }
      img(i, j) = std::clamp(acc / (ss * ss), 0.0, 1.0);
    }
  }
  return img;
}

namespace detail {

// weights[o][s]: fraction of output cell o covered by source cell s.
inline std::vector<std::vector<double>> area_weights(std::size_t src, std::size_t dst) {
  std::vector<std::vector<double>> w(dst, std::vector<double>(src, 0.0));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t o = 0; o < dst; ++o) {
    const double lo = o * scale;
    const double hi = (o + 1) * scale;
    for (auto s = static_cast<std::size_t>(std::floor(lo)); s < src && s < hi; ++s) {
      const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
      if (overlap > 0.0) w[o][s] = overlap / scale;
    }
  }
  return w;
}

}  // namespace detail

/// Area-averaging resample (box filter with fractional overlaps).
inline Image resample_area(const Image& src, std::size_t rows, std::size_t cols) {
  const auto wr = detail::area_weights(src.rows(), rows);
  const auto wc = detail::area_weights(src.cols(), cols);
  Image tmp(src.rows(), cols);
  for (std::size_t i = 0; i < src.rows(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < src.cols(); ++c) s += wc[j][c] * src(i, c);
      tmp(i, j) = s;
    }
  }
  const auto [mn, mx] = std::minmax_element(src.begin(), src.end());
  Image out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < src.rows(); ++r) s += wr[i][r] * tmp(r, j);
      out(i, j) = std::clamp(s, *mn, *mx);
    }
  }
  return out;
}

}  // namespace tgvkl
