#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <stdexcept>

#include "tgvkl/image.hpp"

namespace tgvkl {

namespace detail {

// The FFTW planner is not thread-safe; execution of an existing plan is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

struct PlanDestroy {
  void operator()(fftw_plan p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

using PlanHandle = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDestroy>;

}  // namespace detail

/// Complex plane allocated with FFTW's aligned allocator.
class ComplexPlane {
 public:
  ComplexPlane() = default;
  explicit ComplexPlane(Dims d) : dims_(d), data_(allocate(d.size())) {
    for (std::size_t k = 0; k < d.size(); ++k) data_.get()[k] = {0.0, 0.0};
  }
  ComplexPlane(const ComplexPlane& other) : ComplexPlane(other.dims_) {
    for (std::size_t k = 0; k < size(); ++k) data_.get()[k] = other.data_.get()[k];
  }
  ComplexPlane& operator=(const ComplexPlane& other) {
    if (this != &other) {
      ComplexPlane tmp(other);
      *this = std::move(tmp);
    }
    return *this;
  }
  ComplexPlane(ComplexPlane&&) noexcept = default;
  ComplexPlane& operator=(ComplexPlane&&) noexcept = default;

  [[nodiscard]] Dims dims() const noexcept { return dims_; }
  [[nodiscard]] std::size_t size() const noexcept { return dims_.size(); }
  std::complex<double>& operator[](std::size_t k) noexcept { return data_.get()[k]; }
  const std::complex<double>& operator[](std::size_t k) const noexcept { return data_.get()[k]; }
  [[nodiscard]] fftw_complex* raw() noexcept {
    return reinterpret_cast<fftw_complex*>(data_.get());
  }

 private:
  static std::complex<double>* allocate(std::size_t n) {
    void* p = fftw_malloc(sizeof(std::complex<double>) * n);
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<std::complex<double>*>(p);
  }

  Dims dims_;
  std::unique_ptr<std::complex<double>[], detail::FftwFree> data_;
};

inline ComplexPlane to_complex(const Image& img) {
  ComplexPlane out(img.dims());
  for (std::size_t k = 0; k < img.size(); ++k) out[k] = {img[k], 0.0};
  return out;
}

inline Image real_part(const ComplexPlane& c) {
  Image out(c.dims());
  for (std::size_t k = 0; k < c.size(); ++k) out[k] = c[k].real();
  return out;
}

/// Unnormalized forward / normalized inverse 2-D DFT on a fixed grid.
/// Const member functions may be called concurrently.
class Fft2 {
 public:
  explicit Fft2(Dims d) : dims_(d) {
    ComplexPlane scratch(d);
    std::lock_guard lock(detail::fftw_planner_mutex());
    const int n0 = static_cast<int>(d.rows);
    const int n1 = static_cast<int>(d.cols);
    forward_.reset(fftw_plan_dft_2d(n0, n1, scratch.raw(), scratch.raw(), FFTW_FORWARD,
                                    FFTW_ESTIMATE));
    backward_.reset(fftw_plan_dft_2d(n0, n1, scratch.raw(), scratch.raw(), FFTW_BACKWARD,
                                     FFTW_ESTIMATE));
    if (!forward_ || !backward_) throw std::runtime_error("Fft2: FFTW planning failed");
  }

  [[nodiscard]] Dims dims() const noexcept { return dims_; }

  void forward(ComplexPlane& data) const {
    require_same_dims(data.dims(), dims_, "Fft2::forward");
    fftw_execute_dft(forward_.get(), data.raw(), data.raw());
  }

  void inverse(ComplexPlane& data) const {
    require_same_dims(data.dims(), dims_, "Fft2::inverse");
    fftw_execute_dft(backward_.get(), data.raw(), data.raw());
    const double scale = 1.0 / static_cast<double>(dims_.size());
    for (std::size_t k = 0; k < data.size(); ++k) data[k] *= scale;
  }

  [[nodiscard]] ComplexPlane forward(const Image& img) const {
    ComplexPlane c = to_complex(img);
    forward(c);
    return c;
  }

  [[nodiscard]] Image inverse_real(ComplexPlane c) const {
    inverse(c);
    return real_part(c);
  }

 private:
  Dims dims_;
  detail::PlanHandle forward_;
  detail::PlanHandle backward_;
};

}  // namespace tgvkl
