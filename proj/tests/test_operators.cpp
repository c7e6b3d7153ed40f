#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace tgvkl;
using testutil::max_abs_diff;
using testutil::random_image;

TEST(GaussianPsf, SingleSample) {
  const Image k = gaussian_psf(1, 1.0);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_DOUBLE_EQ(k[0], 1.0);
}

TEST(GaussianPsf, FlatLimit) {
  const Image k = gaussian_psf(3, 1e3);
  for (double v : k) EXPECT_NEAR(v, 1.0 / 9.0, 1e-3);
}

TEST(GaussianPsf, CenterToCornerRatio) {
  const Image k = gaussian_psf(5, 1.0);
  double total = 0.0;
  for (double v : k) total += v;
  EXPECT_NEAR(total, 1.0, 1e-15);
  // exp(0) / exp(-(2^2 + 2^2) / 2) = e^4
  EXPECT_NEAR(k(2, 2) / k(0, 0), std::exp(4.0), 1e-9);
  EXPECT_DOUBLE_EQ(k(0, 1), k(1, 0));
}

TEST(GaussianPsf, RejectsBadParameters) {
  EXPECT_THROW(gaussian_psf(4, 1.0), std::invalid_argument);
  EXPECT_THROW(gaussian_psf(5, 0.0), std::invalid_argument);
  EXPECT_THROW(gaussian_psf(5, -1.0), std::invalid_argument);
}

TEST(Bccb, DeltaPsfIsIdentity) {
  Rng rng(1);
  const Image u = random_image({6, 5}, rng);
  const BccbOperator A(Image(1, 1, 1.0), u.dims());
  EXPECT_LT(max_abs_diff(A.apply(u), u), 1e-14);
  EXPECT_LT(max_abs_diff(A.apply_adjoint(u), u), 1e-14);
}

TEST(Bccb, NormalizedPsfPreservesConstants) {
  const BccbOperator A(gaussian_psf(5, 1.0), {12, 9});
  EXPECT_NEAR(std::abs(A.spectrum()[0] - 1.0), 0.0, 1e-15);
  const Image c(12, 9, 3.25);
  EXPECT_LT(max_abs_diff(A.apply(c), c), 1e-13);
}

TEST(Bccb, MatchesDirectConvolution8x8) {
  Rng rng(2);
  const Image u = random_image({8, 8}, rng);
  const Image psf = gaussian_psf(5, 1.0);
  const BccbOperator A(psf, u.dims());
  EXPECT_LT(max_abs_diff(A.apply(u), testutil::periodic_convolve(u, psf)), 1e-10);
}

TEST(Bccb, MatchesDirectConvolutionOnSmallGrids) {
  Rng rng(3);
  for (std::size_t n1 = 3; n1 <= 16; n1 += 3) {
    for (std::size_t n2 = 3; n2 <= 16; n2 += 2) {
      // Non-symmetric kernel with different odd sides.
      Image psf = random_image({3, std::min<std::size_t>(5, n2 % 2 ? n2 : n2 - 1)}, rng, 0, 1);
      const Image u = random_image({n1, n2}, rng);
      const BccbOperator A(psf, u.dims());
      EXPECT_LT(max_abs_diff(A.apply(u), testutil::periodic_convolve(u, psf)), 1e-10)
          << n1 << "x" << n2;
    }
  }
}

TEST(Bccb, RejectsBadShapes) {
  EXPECT_THROW(BccbOperator(Image(2, 3, 1.0), {8, 8}), std::invalid_argument);
  EXPECT_THROW(BccbOperator(gaussian_psf(5, 1.0), {3, 8}), std::invalid_argument);
  const BccbOperator A(gaussian_psf(3, 1.0), {8, 8});
  EXPECT_THROW(A.apply(Image(8, 7)), std::invalid_argument);
}

TEST(Grad, ConstantGivesZero) {
  const auto g = grad(Image(5, 4, 2.0));
  for (std::size_t p = 0; p < 2; ++p) {
    for (double v : g[p]) EXPECT_EQ(v, 0.0);
  }
}

TEST(Grad, HandEvaluatedWrap) {
  Image u(2, 4);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) u(i, j) = static_cast<double>(j);
  }
  const auto g = grad(u);
  const double expected[4] = {1, 1, 1, -3};
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(g[0](0, j), expected[j]);
    EXPECT_EQ(g[1](0, j), 0.0);
  }
}

TEST(Grad, AdjointOfZeroAndOfConstants) {
  const Image z = grad_adjoint(VectorField2(Dims{4, 6}));
  for (double v : z) EXPECT_EQ(v, 0.0);
  const Image c = grad_adjoint(grad(Image(4, 6, 1.5)));
  for (double v : c) EXPECT_EQ(v, 0.0);
}

TEST(SymGrad, ZeroAndRepeatedPlanes) {
  const auto z = sym_grad(VectorField2(Dims{5, 5}));
  for (std::size_t p = 0; p < 4; ++p) {
    for (double v : z[p]) EXPECT_EQ(v, 0.0);
  }
  Rng rng(4);
  const auto e = sym_grad(testutil::random_field<2>({7, 6}, rng));
  EXPECT_EQ(e[1], e[2]);
}

namespace {

template <class Fwd, class Adj, class MakeX, class MakeY>
void check_adjoint(Fwd fwd, Adj adj, MakeX mx, MakeY my, int pairs) {
  for (int t = 0; t < pairs; ++t) {
    const auto x = mx();
    const auto y = my();
    const double lhs = dot(fwd(x), y);
    const double rhs = dot(x, adj(y));
    const double scale = std::sqrt(squared_norm(x) * squared_norm(y));
    EXPECT_LE(std::fabs(lhs - rhs), 1e-10 * scale);
  }
}

}  // namespace

TEST(Adjoint, AllOperatorsOn100Pairs) {
  Rng rng(5);
  for (Dims d : {Dims{8, 8}, Dims{7, 12}, Dims{16, 5}}) {
    const BccbOperator A(testutil::random_image({5, 3}, rng, 0, 1), d);
    const auto [dh, dv] = difference_operators(d);
    auto img = [&] { return random_image(d, rng); };
    auto f2 = [&] { return testutil::random_field<2>(d, rng); };
    auto f4 = [&] { return testutil::random_field<4>(d, rng); };
    check_adjoint([&](const Image& x) { return A.apply(x); },
                  [&](const Image& y) { return A.apply_adjoint(y); }, img, img, 100);
    check_adjoint([](const Image& x) { return diff_h(x); },
                  [](const Image& y) { return diff_h_adjoint(y); }, img, img, 100);
    check_adjoint([](const Image& x) { return diff_v(x); },
                  [](const Image& y) { return diff_v_adjoint(y); }, img, img, 100);
    check_adjoint([](const Image& x) { return grad(x); },
                  [](const VectorField2& y) { return grad_adjoint(y); }, img, f2, 100);
    check_adjoint([](const VectorField2& x) { return sym_grad(x); },
                  [](const VectorField4& y) { return sym_grad_adjoint(y); }, f2, f4, 100);
    // Spectral difference operators agree with the stencils.
    const Image u = img();
    EXPECT_LT(max_abs_diff(dh.apply(u), diff_h(u)), 1e-12);
    EXPECT_LT(max_abs_diff(dv.apply(u), diff_v(u)), 1e-12);
    EXPECT_LT(max_abs_diff(dh.apply_adjoint(u), diff_h_adjoint(u)), 1e-12);
  }
}

TEST(FourierSystem, ZeroFrequencyIsDiag211) {
  const BccbOperator A(gaussian_psf(5, 1.0), {8, 8});
  const auto [dh, dv] = difference_operators({8, 8});
  const FourierSystem sys(A.spectrum(), dh.spectrum(), dv.spectrum());
  const Hermitian3& m = sys.matrix(0);
  EXPECT_NEAR(m.m11, 2.0, 1e-14);
  EXPECT_NEAR(m.m22, 1.0, 1e-14);
  EXPECT_NEAR(m.m33, 1.0, 1e-14);
  EXPECT_NEAR(std::abs(m.m12), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(m.m13), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(m.m23), 0.0, 1e-14);
}

TEST(FourierSystem, HermitianAndPositiveDefinite) {
  Rng rng(6);
  const Dims d{9, 6};
  const BccbOperator A(testutil::random_image({3, 3}, rng, 0, 1), d);
  const auto [dh, dv] = difference_operators(d);
  const FourierSystem sys(A.spectrum(), dh.spectrum(), dv.spectrum());
  for (std::size_t f = 0; f < d.size(); ++f) {
    const Hermitian3& m = sys.matrix(f);
    double herm = 0.0;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) herm = std::max(herm, std::abs(m.at(r, c) - std::conj(m.at(c, r))));
    }
    EXPECT_EQ(herm, 0.0);
    // det(tI - M) = t^3 - c2 t^2 + c1 t - c0; all roots positive iff c2, c1, c0 > 0.
    const double c2 = m.m11 + m.m22 + m.m33;
    const double c1 = (m.m11 * m.m22 - std::norm(m.m12)) + (m.m11 * m.m33 - std::norm(m.m13)) +
                      (m.m22 * m.m33 - std::norm(m.m23));
    const double c0 = m.determinant();
    EXPECT_GT(c2, 0.0);
    EXPECT_GT(c1, 0.0);
    EXPECT_GT(c0, 0.0);
    // Inverse times matrix is the identity.
    const Hermitian3 inv = sys.inverse(f);
    for (int c = 0; c < 3; ++c) {
      std::array<std::complex<double>, 3> e{};
      e[static_cast<std::size_t>(c)] = 1.0;
      const auto col = inv.multiply(m.multiply(e));
      for (int r = 0; r < 3; ++r) {
        EXPECT_NEAR(std::abs(col[static_cast<std::size_t>(r)] - (r == c ? 1.0 : 0.0)), 0.0, 1e-12);
      }
    }
  }
}

TEST(FourierSystem, MatchesDenseNormalEquations8x8) {
  Rng rng(7);
  const Dims d{8, 8};
  const std::size_t n = d.size();
  const BccbOperator A(gaussian_psf(5, 1.0), d);
  const auto [dh, dv] = difference_operators(d);
  const FourierSystem sys(A.spectrum(), dh.spectrum(), dv.spectrum());
  const Eigen::MatrixXd H = testutil::dense_h(A);
  const Eigen::MatrixXd HtH = H.transpose() * H;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(HtH);
  const Fft2& fft = A.fft();
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(3 * n));
    for (Eigen::Index k = 0; k < r.size(); ++k) r[k] = testutil::uniform(rng, -1, 1);
    const Eigen::VectorXd x = ldlt.solve(r);
    ComplexPlane r0 = fft.forward(testutil::image_from(r, d, 0));
    ComplexPlane r1 = fft.forward(testutil::image_from(r, d, n));
    ComplexPlane r2 = fft.forward(testutil::image_from(r, d, 2 * n));
    sys.solve(r0, r1, r2);
    EXPECT_LT(max_abs_diff(fft.inverse_real(r0), testutil::image_from(x, d, 0)), 1e-8);
    EXPECT_LT(max_abs_diff(fft.inverse_real(r1), testutil::image_from(x, d, n)), 1e-8);
    EXPECT_LT(max_abs_diff(fft.inverse_real(r2), testutil::image_from(x, d, 2 * n)), 1e-8);
  }
}
