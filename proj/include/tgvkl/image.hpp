#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tgvkl {

struct Dims {
  std::size_t rows = 0;
  std::size_t cols = 0;

  [[nodiscard]] constexpr std::size_t size() const noexcept { return rows * cols; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.rows) + "x" + std::to_string(d.cols);
}

/// Row-major vectorization: pixel (i, j) lives at i * cols + j.
constexpr std::size_t flat_index(std::size_t i, std::size_t j, std::size_t cols) noexcept {
  return i * cols + j;
}

inline void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + to_string(a) +
                                " vs " + to_string(b) + ")");
  }
}

class Image {
 public:
  Image() = default;
  Image(std::size_t rows, std::size_t cols, double fill = 0.0)
      : dims_{rows, cols}, data_(rows * cols, fill) {
    check_positive();
  }
  Image(Dims d, double fill = 0.0) : Image(d.rows, d.cols, fill) {}
  Image(std::size_t rows, std::size_t cols, std::vector<double> pixels)
      : dims_{rows, cols}, data_(std::move(pixels)) {
    check_positive();
    if (data_.size() != dims_.size()) {
      throw std::invalid_argument("Image: pixel count " + std::to_string(data_.size()) +
                                  " does not match " + to_string(dims_));
    }
  }

  [[nodiscard]] std::size_t rows() const noexcept { return dims_.rows; }
  [[nodiscard]] std::size_t cols() const noexcept { return dims_.cols; }
  [[nodiscard]] Dims dims() const noexcept { return dims_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[flat_index(i, j, dims_.cols)];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[flat_index(i, j, dims_.cols)];
  }
  double& operator[](std::size_t k) noexcept { return data_[k]; }
  double operator[](std::size_t k) const noexcept { return data_[k]; }

  [[nodiscard]] std::span<double> pixels() noexcept { return data_; }
  [[nodiscard]] std::span<const double> pixels() const noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& vector() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  void check_positive() const {
    if (dims_.rows == 0 || dims_.cols == 0) {
      throw std::invalid_argument("Image: dimensions must be positive");
    }
  }

  Dims dims_;
  std::vector<double> data_;
};

/// A fixed number of image planes sharing one grid (w, z2 use 2; the
/// symmetrized gradient uses 4).
template <std::size_t Planes>
class VectorField {
 public:
  static constexpr std::size_t plane_count = Planes;

  VectorField() = default;
  explicit VectorField(Dims d, double fill = 0.0) {
    for (auto& p : planes_) p = Image(d, fill);
  }
  explicit VectorField(std::array<Image, Planes> planes) : planes_(std::move(planes)) {
    for (const auto& p : planes_) require_same_dims(p.dims(), planes_[0].dims(), "VectorField");
  }

  [[nodiscard]] Dims dims() const noexcept { return planes_[0].dims(); }
  [[nodiscard]] std::size_t pixel_count() const noexcept { return planes_[0].size(); }

  Image& operator[](std::size_t p) noexcept { return planes_[p]; }
  const Image& operator[](std::size_t p) const noexcept { return planes_[p]; }

  /// Euclidean norm of the vector at pixel k.
  [[nodiscard]] double norm_at(std::size_t k) const noexcept {
    double s = 0.0;
    for (const auto& p : planes_) s += p[k] * p[k];
    return std::sqrt(s);
  }

  /// Sum over pixels of the per-pixel Euclidean norm.
  [[nodiscard]] double sum_of_norms() const noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < pixel_count(); ++k) s += norm_at(k);
    return s;
  }

  friend bool operator==(const VectorField&, const VectorField&) = default;

 private:
  std::array<Image, Planes> planes_;
};

using VectorField2 = VectorField<2>;
using VectorField4 = VectorField<4>;

inline double dot(const Image& a, const Image& b) {
  require_same_dims(a.dims(), b.dims(), "dot");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

template <std::size_t N>
double dot(const VectorField<N>& a, const VectorField<N>& b) {
  double s = 0.0;
  for (std::size_t p = 0; p < N; ++p) s += dot(a[p], b[p]);
  return s;
}

inline double squared_norm(const Image& a) { return dot(a, a); }

template <std::size_t N>
double squared_norm(const VectorField<N>& a) {
  return dot(a, a);
}

inline double sum(const Image& a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

inline double squared_distance(const Image& a, const Image& b) {
  require_same_dims(a.dims(), b.dims(), "squared_distance");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

inline bool all_finite(const Image& a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline Image scaled(const Image& a, double s) {
  Image out = a;
  for (double& v : out) v *= s;
  return out;
}

}  // namespace tgvkl
