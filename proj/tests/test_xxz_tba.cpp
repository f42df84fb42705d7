#include <gtest/gtest.h>

#include <sstream>

#include "iprep/exact_diag.hpp"
#include "iprep/xxz_tba.hpp"

using namespace iprep;

namespace {

constexpr double kPi = std::numbers::pi;

/// Residual of the three dressing equations, recomputed from the kernel
/// formula with the profile's own nodes and trapezoid weights.
double oracle_residual(const TBAProfile& p) {
  const double g = p.gamma, h = p.input.h;
  auto kernel = [&](double x) { return std::sin(2 * g) / (std::cosh(x) - std::cos(2 * g)); };
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.lambda.size(); ++i) {
    double iz = 0.0, ir = 0.0, ie = 0.0;
    for (Eigen::Index j = 0; j < p.lambda.size(); ++j) {
      const double k = kernel(p.lambda(i) - p.lambda(j)) * p.weights(j) / (2 * kPi);
      iz += k * p.Z(j);
      ir += k * p.rho(j);
      ie += k * p.eps(j);
    }
    const double c = std::cosh(p.lambda(i)) - std::cos(g);
    worst = std::max({worst, std::abs(p.Z(i) + iz - 1.0), std::abs(p.rho(i) + ir - std::sin(g) / (2 * kPi * c)),
                      std::abs(p.eps(i) + ie - (2 * h - std::sin(g) * std::sin(g) / c))});
  }
  return worst;
}

TBAProfile solve(double delta, double h, int grid = 512) {
  TBAInput in;
  in.delta = delta;
  in.h = h;
  in.grid = grid;
  return solve_dressing(in);
}

}  // namespace

TEST(Kernel, ValuesAndSymmetry) {
  const double g = 1.1;
  EXPECT_NEAR(tba_kernel(0.0, g), std::sin(2 * g) / (1 - std::cos(2 * g)), 1e-15);
  EXPECT_NEAR(tba_kernel(0.0, g), 1.0 / std::tan(g), 1e-14);
  for (double x : {0.3, 1.7, 5.0}) EXPECT_EQ(tba_kernel(x, g), tba_kernel(-x, g));
  EXPECT_NEAR(tba_kernel(0.4, kPi / 2), 0.0, 1e-15);
  EXPECT_THROW(tba_kernel(0.0, kPi), TBAError);
}

TEST(Kernel, DerivativeMatchesDifferences) {
  for (double x : {-2.0, 0.3, 1.5}) {
    const double fd = (tba_kernel(x + 1e-6, 1.2) - tba_kernel(x - 1e-6, 1.2)) / 2e-6;
    EXPECT_NEAR(tba_kernel_derivative(x, 1.2), fd, 1e-8);
  }
}

TEST(Dressing, FreeFermionPoint) {
  const TBAProfile p = solve(0.0, 0.2);
  for (Eigen::Index i = 0; i < p.Z.size(); ++i) EXPECT_NEAR(p.Z(i), 1.0, 1e-14);
  EXPECT_NEAR(p.zeta_sq, 1.0, 1e-14);
  EXPECT_NEAR(p.v_F, std::sqrt(1.0 - 4.0 * 0.2 * 0.2), 1e-9);
  const TBAProfile z = solve(0.0, 0.0);
  EXPECT_NEAR(z.v_F, 1.0, 1e-9);
  EXPECT_NEAR(z.zeta_sq, 1.0, 1e-14);
}

TEST(Dressing, ResidualAgainstIndependentQuadrature) {
  for (double d : {0.2, 0.5, 0.8})
    for (double h : {0.05, 0.2}) {
      const TBAProfile p = solve(d, h);
      if (p.saturated) continue;
      EXPECT_LT(oracle_residual(p), 1e-10) << d << " " << h;
      EXPECT_LT(fixed_point_drift(p), 1e-12);
    }
}

TEST(Dressing, ZeroFieldLimits) {
  for (double d : {0.1, 0.3, 0.5, 0.7}) {
    const TBAProfile p = solve(d, 0.0, 1024);
    EXPECT_NEAR(p.v_F, vf_zero_field(d), 1e-3) << d;
    EXPECT_NEAR(p.zeta_sq, zeta_sq_zero_field(d), 1e-3) << d;
  }
}

TEST(Dressing, FermiVelocityContinuousAtFreePoint) {
  EXPECT_NEAR(solve(1e-3, 0.0, 1024).v_F, 1.0, 1e-3);
  EXPECT_NEAR(vf_zero_field(1e-9), 1.0, 1e-8);
}

TEST(Dressing, ProfilesAreEven) {
  const TBAProfile p = solve(0.6, 0.15);
  const Eigen::Index n = p.Z.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_NEAR(p.Z(i), p.Z(n - 1 - i), 1e-12);
    EXPECT_NEAR(p.rho(i), p.rho(n - 1 - i), 1e-12);
    EXPECT_NEAR(p.eps(i), p.eps(n - 1 - i), 1e-12);
  }
}

TEST(Dressing, CompressibilityPositiveAcrossPhase) {
  for (double d = 0.0; d < 0.95; d += 0.15)
    for (double h = 0.0; h < 1.0; h += 0.1) {
      const TBAProfile p = solve(d, h, 256);
      if (p.saturated) continue;
      EXPECT_GT(p.zeta_sq, 0.0) << d << " " << h;
      EXPECT_GT(p.v_F, 0.0) << d << " " << h;
    }
}

TEST(Dressing, SaturatedAboveCriticalField) {
  const TBAProfile p = solve(0.5, 0.5);
  EXPECT_TRUE(p.saturated);
  EXPECT_EQ(p.Lambda, 0.0);
  EXPECT_THROW(observables(p), TBAError);
}

// Regression values on the 2048-point grid; the 4096-point grid moves them
// by less than 1e-4.
TEST(Dressing, RegressionGoldens) {
  struct Golden {
    double h, lambda, vf, z2, m;
  };
  const Golden gold[] = {{0.1, 2.18851567417589, 0.597328514571435, 1.47060836866505, 0.364932907693427},
                         {0.3, 0.298951952079347, 0.159029371097572, 1.11488223142231, 0.0575006589448213}};
  for (const auto& g : gold) {
    const TBAProfile p = solve(0.5, g.h, 2048);
    EXPECT_NEAR(p.Lambda, g.lambda, 1e-8);
    EXPECT_NEAR(p.v_F, g.vf, 1e-8);
    EXPECT_NEAR(p.zeta_sq, g.z2, 1e-8);
    EXPECT_NEAR(p.m, g.m, 1e-8);
  }
  const TBAProfile fine = solve(0.5, 0.3, 4096);
  EXPECT_NEAR(fine.v_F, gold[1].vf, 1e-4);
  EXPECT_NEAR(fine.zeta_sq, gold[1].z2, 1e-4);
}

TEST(Dressing, GridDoublingConverges) {
  const TBAProfile a = solve(0.4, 0.1, 512), b = solve(0.4, 0.1, 1024);
  EXPECT_LT(std::abs(a.v_F - b.v_F), 1e-3);
  EXPECT_LT(std::abs(a.zeta_sq - b.zeta_sq), 1e-3);
}

TEST(Dressing, InputValidation) {
  TBAInput in;
  in.grid = 32;
  EXPECT_THROW(solve_dressing(in), std::invalid_argument);
  in = {};
  in.tolerance = 0.0;
  EXPECT_THROW(solve_dressing(in), std::invalid_argument);
  in = {};
  in.delta = 1.0;
  EXPECT_THROW(solve_dressing(in), std::invalid_argument);
}

TEST(Excitations, EnergyFormula) {
  EXPECT_EQ(excitation_energy(0.8, 1.2, {}, 20), 0.0);
  EXPECT_NEAR(excitation_energy(0.8, 1.2, {0, 0, 1, 0}, 20), 2 * kPi * 0.8 / 20, 1e-15);
  EXPECT_NEAR(excitation_energy(1.0, 1.0, {2, 1, 0, 0}, 10), 2 * kPi * 2.0 / 10, 1e-15);
  EXPECT_THROW(excitation_energy(1.0, 1.0, {0, 0, -1, 0}, 10), std::invalid_argument);
}

TEST(Excitations, SectorGapUsesNeutralLabels) {
  TBAProfile p;
  p.v_F = 0.7;
  p.zeta = 0.9;
  const double a = excitation_energy(0.7, 0.9, {0, 0, 1, 0}, 12), b = excitation_energy(0.7, 0.9, {0, 1, 0, 0}, 12);
  EXPECT_DOUBLE_EQ(sector_gap_prediction(p, 12), std::min(a, b));
}

// Fixed magnon density 1/4 at Delta = 0.5; N = 20 is the largest size with
// a cheap dense sector (M = 10, dimension 15504 handled by Lanczos).
TEST(Excitations, PredictedGapMatchesExactDiagonalization) {
  TBAInput in;
  in.delta = 0.5;
  in.grid = 256;
  const TBAProfile p = solve_for_density(in, 0.25);
  EXPECT_NEAR(p.m, 0.25, 1e-6);
  const GapRecord ed = xxz_sector_gap(20, 10, 0.5);
  EXPECT_LT(std::abs(sector_gap_prediction(p, 20) - ed.gap) / ed.gap, 0.25);
}

TEST(Sweep, ThreadCountDoesNotChangeProfiles) {
  TBAInput base;
  base.grid = 256;
  const auto a = tba_sweep({0.2, 0.6}, {0.0, 0.1, 0.3}, base, 1);
  const auto b = tba_sweep({0.2, 0.6}, {0.0, 0.1, 0.3}, base, 3);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].v_F, b[i].v_F);
    EXPECT_EQ(a[i].zeta_sq, b[i].zeta_sq);
  }
  std::ostringstream sa, sb;
  tba_sweep_csv(a).write(sa);
  tba_sweep_csv(b).write(sb);
  EXPECT_EQ(sa.str(), sb.str());
}
