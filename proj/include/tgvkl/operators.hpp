#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tgvkl/fft.hpp"
#include "tgvkl/image.hpp"

namespace tgvkl {

/// band x band samples of an isotropic Gaussian, normalized to unit sum.
inline Image gaussian_psf(int band, double sigma) {
  if (band < 1 || band % 2 == 0) {
    throw std::invalid_argument("gaussian_psf: band must be a positive odd integer, got " +
                                std::to_string(band));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("gaussian_psf: sigma must be positive and finite");
  }
  const auto side = static_cast<std::size_t>(band);
  const int half = band / 2;
  Image k(side, side);
  double total = 0.0;
  for (int r = 0; r < band; ++r) {
    for (int c = 0; c < band; ++c) {
      const double x = r - half;
      const double y = c - half;
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = v;
      total += v;
    }
  }
  for (double& v : k) v /= total;
  return k;
}

/// Periodic convolution operator diagonalized by the 2-D DFT.
///
/// The kernel is stored as its full-grid impulse response (the psf zero-padded
/// and circularly shifted so its center sits at pixel (0,0)).
class BccbOperator {
 public:
  /// Centered kernel with odd side lengths, applied on a grid of size dims.
  BccbOperator(const Image& psf, Dims dims) : psf_(psf) {
    if (psf.rows() % 2 == 0 || psf.cols() % 2 == 0) {
      throw std::invalid_argument("BccbOperator: psf side lengths must be odd");
    }
    if (psf.rows() > dims.rows || psf.cols() > dims.cols) {
      throw std::invalid_argument("BccbOperator: psf " + to_string(psf.dims()) +
                                  " larger than grid " + to_string(dims));
    }
    Image impulse(dims);
    const std::size_t cr = psf.rows() / 2;
    const std::size_t cc = psf.cols() / 2;
    for (std::size_t r = 0; r < psf.rows(); ++r) {
      for (std::size_t c = 0; c < psf.cols(); ++c) {
        const std::size_t i = (r + dims.rows - cr) % dims.rows;
        const std::size_t j = (c + dims.cols - cc) % dims.cols;
        impulse(i, j) += psf(r, c);
      }
    }
    init(impulse);
  }

  /// Operator given directly by its response to a unit impulse at (0,0).
  static BccbOperator from_impulse_response(const Image& impulse) {
    return BccbOperator(impulse);
  }

  [[nodiscard]] Dims dims() const noexcept { return spectrum_.dims(); }
  [[nodiscard]] const Image& psf() const noexcept { return psf_; }
  [[nodiscard]] const ComplexPlane& spectrum() const noexcept { return spectrum_; }
  [[nodiscard]] const Fft2& fft() const noexcept { return *fft_; }
  [[nodiscard]] std::shared_ptr<const Fft2> shared_fft() const noexcept { return fft_; }

  [[nodiscard]] Image apply(const Image& img) const { return filter(img, false); }
  [[nodiscard]] Image apply_adjoint(const Image& img) const { return filter(img, true); }

 private:
  explicit BccbOperator(const Image& impulse) : psf_(impulse) { init(impulse); }

  void init(const Image& impulse) {
    fft_ = std::make_shared<const Fft2>(impulse.dims());
    spectrum_ = fft_->forward(impulse);
  }

  [[nodiscard]] Image filter(const Image& img, bool adjoint) const {
    require_same_dims(img.dims(), dims(), "BccbOperator::apply");
    ComplexPlane c = fft_->forward(img);
    for (std::size_t k = 0; k < c.size(); ++k) {
      c[k] *= adjoint ? std::conj(spectrum_[k]) : spectrum_[k];
    }
    return fft_->inverse_real(std::move(c));
  }

  Image psf_;
  std::shared_ptr<const Fft2> fft_;
  ComplexPlane spectrum_;
};

/// Forward periodic differences as convolution operators: (D_h, D_v).
inline std::pair<BccbOperator, BccbOperator> difference_operators(Dims d) {
  Image kh(d);
  kh(0, 0) = -1.0;
  kh(0, (d.cols - 1) % d.cols) += 1.0;
  Image kv(d);
  kv(0, 0) = -1.0;
  kv((d.rows - 1) % d.rows, 0) += 1.0;
  return {BccbOperator::from_impulse_response(kh), BccbOperator::from_impulse_response(kv)};
}

// Spatial-domain stencils, exact and cheaper than going through the FFT.

inline Image diff_h(const Image& u) {
  Image out(u.dims());
  const std::size_t n1 = u.rows();
  const std::size_t n2 = u.cols();
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const std::size_t jp = (j + 1 == n2) ? 0 : j + 1;
      out(i, j) = u(i, jp) - u(i, j);
    }
  }
  return out;
}

inline Image diff_v(const Image& u) {
  Image out(u.dims());
  const std::size_t n1 = u.rows();
  const std::size_t n2 = u.cols();
  for (std::size_t i = 0; i < n1; ++i) {
    const std::size_t ip = (i + 1 == n1) ? 0 : i + 1;
    for (std::size_t j = 0; j < n2; ++j) out(i, j) = u(ip, j) - u(i, j);
  }
  return out;
}

inline Image diff_h_adjoint(const Image& p) {
  Image out(p.dims());
  const std::size_t n1 = p.rows();
  const std::size_t n2 = p.cols();
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const std::size_t jm = (j == 0) ? n2 - 1 : j - 1;
      out(i, j) = p(i, jm) - p(i, j);
    }
  }
  return out;
}

inline Image diff_v_adjoint(const Image& p) {
  Image out(p.dims());
  const std::size_t n1 = p.rows();
  const std::size_t n2 = p.cols();
  for (std::size_t i = 0; i < n1; ++i) {
    const std::size_t im = (i == 0) ? n1 - 1 : i - 1;
    for (std::size_t j = 0; j < n2; ++j) out(i, j) = p(im, j) - p(i, j);
  }
  return out;
}

inline VectorField2 grad(const Image& u) { return VectorField2({diff_h(u), diff_v(u)}); }

inline Image grad_adjoint(const VectorField2& p) {
  Image out = diff_h_adjoint(p[0]);
  const Image v = diff_v_adjoint(p[1]);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[k];
  return out;
}

/// Planes (D_h w1, (D_v w1 + D_h w2)/2, (D_v w1 + D_h w2)/2, D_v w2).
inline VectorField4 sym_grad(const VectorField2& w) {
  const Image a = diff_h(w[0]);
  Image mixed = diff_v(w[0]);
  const Image h2 = diff_h(w[1]);
  for (std::size_t k = 0; k < mixed.size(); ++k) mixed[k] = 0.5 * (mixed[k] + h2[k]);
  Image d = diff_v(w[1]);
  return VectorField4({a, mixed, mixed, std::move(d)});
}

inline VectorField2 sym_grad_adjoint(const VectorField4& s) {
  Image off(s.dims());
  for (std::size_t k = 0; k < off.size(); ++k) off[k] = 0.5 * (s[1][k] + s[2][k]);
  Image w1 = diff_h_adjoint(s[0]);
  const Image w1b = diff_v_adjoint(off);
  Image w2 = diff_h_adjoint(off);
  const Image w2b = diff_v_adjoint(s[3]);
  for (std::size_t k = 0; k < w1.size(); ++k) {
    w1[k] += w1b[k];
    w2[k] += w2b[k];
  }
  return VectorField2({std::move(w1), std::move(w2)});
}

/// Hermitian 3x3 matrix stored by its upper triangle; diagonal is real.
struct Hermitian3 {
  double m11 = 0, m22 = 0, m33 = 0;
  std::complex<double> m12, m13, m23;

  [[nodiscard]] std::complex<double> at(int r, int c) const {
    if (r == c) return r == 0 ? m11 : (r == 1 ? m22 : m33);
    if (r > c) return std::conj(at(c, r));
    if (r == 0) return c == 1 ? m12 : m13;
    return m23;
  }

  [[nodiscard]] double determinant() const {
    return m11 * m22 * m33 - m11 * std::norm(m23) - m33 * std::norm(m12) -
           m22 * std::norm(m13) + 2.0 * std::real(m12 * m23 * std::conj(m13));
  }

  /// Closed-form adjugate inverse; the result is Hermitian as well.
  [[nodiscard]] Hermitian3 inverse() const {
    const double det = determinant();
    if (!(det > 0.0) || !std::isfinite(det)) {
      throw std::runtime_error("Hermitian3::inverse: matrix is not positive definite");
    }
    Hermitian3 inv;
    inv.m11 = (m22 * m33 - std::norm(m23)) / det;
    inv.m22 = (m11 * m33 - std::norm(m13)) / det;
    inv.m33 = (m11 * m22 - std::norm(m12)) / det;
    inv.m12 = (m13 * std::conj(m23) - m12 * m33) / det;
    inv.m13 = (m12 * m23 - m13 * m22) / det;
    inv.m23 = (m13 * std::conj(m12) - m11 * m23) / det;
    return inv;
  }

  [[nodiscard]] std::array<std::complex<double>, 3> multiply(
      const std::array<std::complex<double>, 3>& x) const {
    return {m11 * x[0] + m12 * x[1] + m13 * x[2],
            std::conj(m12) * x[0] + m22 * x[1] + m23 * x[2],
            std::conj(m13) * x[0] + std::conj(m23) * x[1] + m33 * x[2]};
  }
};

/// Per-frequency normal-equation matrices of the stacked operator
/// H = [A 0; D -I; 0 E; I 0] acting on x = (u, w1, w2), with their inverses.
class FourierSystem {
 public:
  FourierSystem(const ComplexPlane& a, const ComplexPlane& dh, const ComplexPlane& dv)
      : dims_(a.dims()) {
    require_same_dims(dh.dims(), a.dims(), "assemble_fourier_system");
    require_same_dims(dv.dims(), a.dims(), "assemble_fourier_system");
    matrices_.resize(a.size());
    inverses_.resize(a.size());
    for (std::size_t f = 0; f < a.size(); ++f) {
      const double h2 = std::norm(dh[f]);
      const double v2 = std::norm(dv[f]);
      Hermitian3 m;
      m.m11 = std::norm(a[f]) + h2 + v2 + 1.0;
      m.m12 = -std::conj(dh[f]);
      m.m13 = -std::conj(dv[f]);
      m.m22 = 1.0 + h2 + 0.5 * v2;
      m.m23 = 0.5 * std::conj(dv[f]) * dh[f];
      m.m33 = 1.0 + v2 + 0.5 * h2;
      matrices_[f] = m;
      inverses_[f] = m.inverse();
    }
  }

  [[nodiscard]] Dims dims() const noexcept { return dims_; }
  [[nodiscard]] const Hermitian3& matrix(std::size_t f) const { return matrices_.at(f); }
  [[nodiscard]] const Hermitian3& inverse(std::size_t f) const { return inverses_.at(f); }

  /// Solves M(f) x = r in place for every frequency.
  void solve(ComplexPlane& r0, ComplexPlane& r1, ComplexPlane& r2) const {
    require_same_dims(r0.dims(), dims_, "FourierSystem::solve");
    require_same_dims(r1.dims(), dims_, "FourierSystem::solve");
    require_same_dims(r2.dims(), dims_, "FourierSystem::solve");
    for (std::size_t f = 0; f < inverses_.size(); ++f) {
      const auto x = inverses_[f].multiply({r0[f], r1[f], r2[f]});
      r0[f] = x[0];
      r1[f] = x[1];
      r2[f] = x[2];
    }
  }

 private:
  Dims dims_;
  std::vector<Hermitian3> matrices_;
  std::vector<Hermitian3> inverses_;
};

inline FourierSystem assemble_fourier_system(const ComplexPlane& a, const ComplexPlane& dh,
                                             const ComplexPlane& dv) {
  return FourierSystem(a, dh, dv);
}

/// The 1x1 analogue for the TV splitting H = [A; D; I].
class ScalarFourierSystem {
 public:
  ScalarFourierSystem(const ComplexPlane& a, const ComplexPlane& dh, const ComplexPlane& dv)
      : dims_(a.dims()), inverse_(a.size()) {
    require_same_dims(dh.dims(), a.dims(), "ScalarFourierSystem");
    require_same_dims(dv.dims(), a.dims(), "ScalarFourierSystem");
    for (std::size_t f = 0; f < a.size(); ++f) {
      inverse_[f] = 1.0 / (std::norm(a[f]) + std::norm(dh[f]) + std::norm(dv[f]) + 1.0);
    }
  }

  [[nodiscard]] Dims dims() const noexcept { return dims_; }

  void solve(ComplexPlane& r) const {
    require_same_dims(r.dims(), dims_, "ScalarFourierSystem::solve");
    for (std::size_t f = 0; f < inverse_.size(); ++f) r[f] *= inverse_[f];
  }

 private:
  Dims dims_;
  std::vector<double> inverse_;
};

}  // namespace tgvkl
