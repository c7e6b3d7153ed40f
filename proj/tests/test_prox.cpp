#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace tgvkl;
using testutil::uniform;

namespace {

double z1_residual(double z, double q, double b, double gamma, double tau) {
  return tau * (1.0 - b / (z + gamma)) + (z - q);
}

}  // namespace

TEST(Z1, ZeroTauReturnsQ) {
  for (double q : {-0.5, 0.0, 3.25, 1e6}) EXPECT_EQ(z1_pointwise(q, 2.0, 0.1, 0.0), q);
}

TEST(Z1, HandExample) {
  const double z = z1_pointwise(1.0, 1.0, 1.0, 1.0);
  EXPECT_NEAR(z, (std::sqrt(5.0) - 1.0) / 2.0, 1e-15);
  EXPECT_NEAR(z1_residual(z, 1, 1, 1, 1), 0.0, 1e-12);
}

TEST(Z1, OptimalityResidualOnRandomInstances) {
  Rng rng(1);
  for (int t = 0; t < 10000; ++t) {
    const double q = uniform(rng, -10.0, 100.0);
    const double b = std::floor(uniform(rng, 0.0, 60.0));
    const double gamma = std::pow(10.0, uniform(rng, -4.0, 0.0));
    const double tau = std::pow(10.0, uniform(rng, -6.0, 6.0));
    const double z = z1_pointwise(q, b, gamma, tau);
    ASSERT_TRUE(z + gamma >= 0.0);
    if (b > 0.0) {
      ASSERT_GT(z + gamma, 0.0);
      EXPECT_LE(std::fabs(z1_residual(z, q, b, gamma, tau)), 1e-9 * (1.0 + std::fabs(q)))
          << q << " " << b << " " << gamma << " " << tau;
    } else {
      // b = 0: projection onto z >= -gamma of q - tau.
      EXPECT_NEAR(z, std::max(q - tau, -gamma), 1e-12 * (1.0 + std::fabs(q) + tau));
    }
  }
}

TEST(Z1, MatchesScalarMinimizationOracle) {
  Rng rng(2);
  for (int t = 0; t < 2000; ++t) {
    const double q = uniform(rng, -2.0, 40.0);
    const double b = std::floor(uniform(rng, 0.0, 40.0));
    const double gamma = std::pow(10.0, uniform(rng, -3.0, 0.0));
    const double tau = std::pow(10.0, uniform(rng, -3.0, 3.0));
    EXPECT_NEAR(z1_pointwise(q, b, gamma, tau), oracle::z1(q, b, gamma, tau), 1e-8)
        << q << " " << b << " " << gamma << " " << tau;
  }
}

TEST(Z1, DerivativeMatchesFiniteDifference) {
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    const double q = uniform(rng, 0.0, 40.0);
    const double b = std::floor(uniform(rng, 1.0, 40.0));
    const double gamma = 2e-3;
    const double tau = std::pow(10.0, uniform(rng, -2.0, 2.0));
    const double h = 1e-6 * tau;
    const double fd =
        (z1_pointwise(q, b, gamma, tau + h) - z1_pointwise(q, b, gamma, tau - h)) / (2 * h);
    const double an = z1_derivative_pointwise(q, b, gamma, tau);
    EXPECT_NEAR(an, fd, 1e-5 * std::fabs(an) + 1e-9);
  }
}

TEST(Z1, RejectsBadInputs) {
  EXPECT_THROW(z1_pointwise(1.0, 1.0, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(z1_pointwise(1.0, 1.0, 1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(z1_pointwise(std::nan(""), 1.0, 1.0, 1.0), std::invalid_argument);
}

TEST(Discrepancy, PerfectFitAtZero) {
  Rng rng(4);
  Image b = testutil::poisson_image(Image(6, 6, 5.0), rng);
  for (double& v : b) v += 1.0;
  const Image gamma(6, 6, 0.01);
  Image q = b;
  for (std::size_t k = 0; k < q.size(); ++k) q[k] -= gamma[k];
  EXPECT_NEAR(discrepancy_of_tau(q, b, gamma, 0.0), 0.0, 1e-12);
}

TEST(Discrepancy, MonotoneConvexAndDifferentiable) {
  Rng rng(5);
  for (int inst = 0; inst < 10; ++inst) {
    const testutil::TauInstance in = testutil::tau_instance({16, 16}, rng);
    std::vector<double> taus;
    for (int i = 0; i <= 70; ++i) taus.push_back(std::pow(10.0, -4.0 + 7.0 * i / 70.0));
    std::vector<double> vals;
    for (double t : taus) vals.push_back(discrepancy_of_tau(in.q, in.b, in.gamma, t));
    const double scale = vals.front();
    for (std::size_t i = 1; i < vals.size(); ++i) EXPECT_LE(vals[i], vals[i - 1]);
    for (std::size_t i = 2; i < vals.size(); ++i) {
      const double s1 = (vals[i - 1] - vals[i - 2]) / (taus[i - 1] - taus[i - 2]);
      const double s2 = (vals[i] - vals[i - 1]) / (taus[i] - taus[i - 1]);
      EXPECT_GE(s2 - s1, -1e-8 * scale);
    }
    for (double t : {1e-3, 0.1, 1.0, 10.0, 300.0}) {
      const double h = 1e-6 * t;
      const double fd = (discrepancy_of_tau(in.q, in.b, in.gamma, t + h) -
                         discrepancy_of_tau(in.q, in.b, in.gamma, t - h)) /
                        (2 * h);
      const double an = discrepancy_derivative(in.q, in.b, in.gamma, t);
      EXPECT_LE(an, 0.0);
      EXPECT_NEAR(an, fd, 1e-5 * std::fabs(an)) << "tau " << t;
    }
  }
}

TEST(Discrepancy, ZeroCountsDerivativeNonPositive) {
  Rng rng(6);
  const Image q = testutil::random_image({5, 5}, rng, -1.0, 3.0);
  const Image b(5, 5, 0.0);
  const Image gamma(5, 5, 0.01);
  for (double t : {1e-3, 0.5, 2.0, 50.0}) EXPECT_LE(discrepancy_derivative(q, b, gamma, t), 0.0);
  EXPECT_THROW(discrepancy_derivative(q, b, gamma, 0.0), std::invalid_argument);
}

TEST(SolveTau, AlreadyBelowWhenFitIsPerfect) {
  Image b(4, 4, 3.0);
  const Image gamma(4, 4, 0.01);
  Image q = b;
  for (std::size_t k = 0; k < q.size(); ++k) q[k] -= gamma[k];
  TauSolveOptions o;
  const TauSolution s = solve_tau(q, b, gamma, o);
  EXPECT_EQ(s.status, TauStatus::AlreadyBelow);
  EXPECT_EQ(s.tau, o.tau_min);
}

TEST(SolveTau, NoRootWhenCapIsTooLow) {
  Rng rng(7);
  const testutil::TauInstance in = testutil::tau_instance({8, 8}, rng);
  TauSolveOptions o;
  o.tau_min = 1e-14;
  o.tau_max = 1e-12;
  o.tau_init = 1e-13;
  const TauSolution s = solve_tau(in.q, in.b, in.gamma, o);
  EXPECT_EQ(s.status, TauStatus::NoRoot);
  EXPECT_EQ(s.tau, o.tau_max);
}

TEST(SolveTau, AgreesWithBisectionAndIgnoresStart) {
  Rng rng(8);
  for (int inst = 0; inst < 20; ++inst) {
    const testutil::TauInstance in = testutil::tau_instance({32, 32}, rng);
    const double n = static_cast<double>(in.q.size());
    ASSERT_GT(discrepancy_of_tau(in.q, in.b, in.gamma, 1e-12), 0.5 * n);
    TauSolveOptions o;
    const TauSolution ref = solve_tau(in.q, in.b, in.gamma, o);
    ASSERT_EQ(ref.status, TauStatus::Converged);
    EXPECT_LE(std::fabs(ref.discrepancy - 0.5 * n), 1e-6 * n);
    EXPECT_LT(ref.derivative, 0.0);
    const double bis = oracle::tau_bisection(in.q, in.b, in.gamma, 1e-12, 1e12);
    EXPECT_NEAR(ref.tau, bis, 1e-6 * bis);
    for (double init : {0.01, 100.0}) {
      o.tau_init = init;
      const TauSolution s = solve_tau(in.q, in.b, in.gamma, o);
      EXPECT_EQ(s.status, TauStatus::Converged);
      EXPECT_NEAR(s.tau, ref.tau, 1e-6 * ref.tau) << "tau_init " << init;
    }
  }
}

TEST(SolveTau, RejectsInvalidOptions) {
  const Image one(2, 2, 1.0);
  TauSolveOptions o;
  o.tau_min = 0.0;
  EXPECT_THROW(solve_tau(one, one, one, o), std::invalid_argument);
  o = {};
  o.tol_abs = -1.0;
  EXPECT_THROW(solve_tau(one, one, one, o), std::invalid_argument);
}

TEST(Shrink, HandExamples) {
  const double alpha = 0.3;
  const double rho = 0.1;
  const double t = alpha / rho;
  VectorField2 q(Dims{1, 3});
  q[0][0] = 0.5 * t;                  // inside
  q[0][1] = 2.0 * t;                  // halved
  q[0][2] = 0.0;                      // zero stays zero
  const VectorField2 z = z2_update(q, alpha, rho);
  EXPECT_EQ(z[0][0], 0.0);
  EXPECT_EQ(z[1][0], 0.0);
  EXPECT_NEAR(z[0][1], t, 1e-15);
  EXPECT_EQ(z[1][1], 0.0);
  EXPECT_EQ(z[0][2], 0.0);
  EXPECT_THROW(z2_update(q, alpha, 0.0), std::invalid_argument);
}

TEST(Shrink, MatchesMinimizationOracle) {
  Rng rng(9);
  const Dims d{1, 200};
  const VectorField2 q2 = testutil::random_field<2>(d, rng, -3.0, 3.0);
  const VectorField4 q4 = testutil::random_field<4>(d, rng, -3.0, 3.0);
  const double alpha = 0.2;
  const double rho = 0.1;
  const VectorField2 z2 = z2_update(q2, alpha, rho);
  const VectorField4 z4 = z3_update(q4, alpha, rho);
  for (std::size_t k = 0; k < d.size(); ++k) {
    const auto o2 = oracle::shrink({q2[0][k], q2[1][k]}, alpha / rho, rng);
    EXPECT_TRUE(o2.probes_ok);
    for (std::size_t p = 0; p < 2; ++p) EXPECT_NEAR(z2[p][k], o2.z[p], 1e-8);
    const auto o4 = oracle::shrink({q4[0][k], q4[1][k], q4[2][k], q4[3][k]}, alpha / rho, rng);
    EXPECT_TRUE(o4.probes_ok);
    for (std::size_t p = 0; p < 4; ++p) EXPECT_NEAR(z4[p][k], o4.z[p], 1e-8);
  }
}

TEST(Shrink, NonExpansive) {
  Rng rng(10);
  for (int t = 0; t < 200; ++t) {
    const VectorField4 a = testutil::random_field<4>({3, 3}, rng, -2.0, 2.0);
    const VectorField4 b = testutil::random_field<4>({3, 3}, rng, -2.0, 2.0);
    const double thr = uniform(rng, 0.0, 3.0);
    VectorField4 da = group_shrink(a, thr);
    const VectorField4 db = group_shrink(b, thr);
    VectorField4 dab = a;
    for (std::size_t p = 0; p < 4; ++p) {
      for (std::size_t k = 0; k < 9; ++k) {
        da[p][k] -= db[p][k];
        dab[p][k] -= b[p][k];
      }
    }
    EXPECT_LE(squared_norm(da), squared_norm(dab) * (1.0 + 1e-14));
  }
}

TEST(Z4, Projection) {
  EXPECT_EQ(z4_update(Image(2, 2, -3.0)), Image(2, 2, 0.0));
  Rng rng(11);
  const Image pos = testutil::random_image({3, 3}, rng, 0.0, 1.0);
  EXPECT_EQ(z4_update(pos), pos);
  const Image mixed = testutil::random_image({4, 4}, rng);
  const Image once = z4_update(mixed);
  EXPECT_EQ(z4_update(once), once);
  for (std::size_t k = 0; k < mixed.size(); ++k) EXPECT_EQ(once[k], std::max(mixed[k], 0.0));
}
