#pragma once

// Thermodynamic Bethe ansatz for the gapless XXZ chain: dressed charge Z,
// root density rho and dressed energy eps on [-Lambda, Lambda], solved by
// trapezoidal Nystrom discretization and fixed-point iteration.

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iprep/csv.hpp"
#include "iprep/parallel.hpp"

namespace iprep {

class TBAError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// K(lambda) = sin(2 gamma) / (cosh lambda - cos(2 gamma)).
inline double tba_kernel(double lambda, double gamma) {
  const double den = std::cosh(lambda) - std::cos(2.0 * gamma);
  if (std::abs(den) < 1e-12) throw TBAError("tba_kernel: pole of the kernel");
  return std::sin(2.0 * gamma) / den;
}

inline double tba_kernel_derivative(double lambda, double gamma) {
  const double den = std::cosh(lambda) - std::cos(2.0 * gamma);
  return -std::sin(2.0 * gamma) * std::sinh(lambda) / (den * den);
}

/// Identification of the kernel parameter with the anisotropy, gamma = arccos(-Delta).
inline double tba_gamma(double delta) { return std::acos(-delta); }

/// Closed-form zero-field limits.
inline double vf_zero_field(double delta) {
  const double g = tba_gamma(delta);
  return std::numbers::pi * std::sin(g) / (2.0 * g);
}
inline double zeta_sq_zero_field(double delta) {
  return std::numbers::pi / (2.0 * (std::numbers::pi - tba_gamma(delta)));
}

struct TBAInput {
  double delta = 0.5;
  double h = 0.0;
  int grid = 1024;
  double lambda_max = 40.0;
  double tolerance = 1e-13;
  int max_iterations = 5000;
  std::optional<double> gamma;  // defaults to arccos(-delta)

  double gamma_tba() const { return gamma ? *gamma : tba_gamma(delta); }

  void validate() const {
    if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("TBAInput: delta must be in [0, 1)");
    if (!(h >= 0.0)) throw std::invalid_argument("TBAInput: h must be nonnegative");
    if (grid < 64) throw std::invalid_argument("TBAInput: grid must have at least 64 points");
    if (!(tolerance > 0.0)) throw std::invalid_argument("TBAInput: tolerance must be positive");
    if (!(lambda_max > 0.0)) throw std::invalid_argument("TBAInput: lambda_max must be positive");
    if (max_iterations < 1) throw std::invalid_argument("TBAInput: max_iterations < 1");
  }
};

struct TBAProfile {
  TBAInput input;
  double gamma = 0.0;
  Eigen::VectorXd lambda, weights;
  Eigen::VectorXd Z, rho, eps;
  double Lambda = 0.0;
  double v_F = 0.0;
  double zeta = 0.0;     // Z(Lambda)
  double zeta_sq = 0.0;
  double m = 0.0;        // integral of rho
  double eps_at_Lambda = 0.0;
  double vf_lambda = 0.0;  // where v_F was evaluated
  double residual = 0.0;
  int iterations = 0;
  bool saturated = false;  // no boundary root: Lambda = 0
};

namespace detail {

struct TBAGrid {
  Eigen::VectorXd lambda, weights;
  Eigen::MatrixXd kw;  // K(lambda_i - lambda_j) w_j / (2 pi)
};

inline TBAGrid make_tba_grid(double Lambda, int n, double gamma) {
  TBAGrid g;
  g.lambda = Eigen::VectorXd::LinSpaced(n, -Lambda, Lambda);
  const double dl = n > 1 ? 2.0 * Lambda / (n - 1) : 0.0;
  g.weights = Eigen::VectorXd::Constant(n, dl);
  g.weights(0) = g.weights(n - 1) = 0.5 * dl;
  g.kw.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      g.kw(i, j) = tba_kernel(g.lambda(i) - g.lambda(j), gamma) * g.weights(j) / (2.0 * std::numbers::pi);
  return g;
}

/// x = rhs - kw x by plain iteration, started from the driving term.
inline Eigen::VectorXd fixed_point(const Eigen::MatrixXd& kw, const Eigen::VectorXd& rhs, double tol,
                                   int max_it, int& used) {
  Eigen::VectorXd x = rhs;
  for (int it = 1; it <= max_it; ++it) {
    Eigen::VectorXd next = rhs - kw * x;
    const double change = (next - x).cwiseAbs().maxCoeff();
    x.swap(next);
    if (change < tol * std::max(1.0, x.cwiseAbs().maxCoeff())) {
      used = it;
      return x;
    }
  }
  throw TBAError("TBA fixed-point iteration did not converge");
}

/// Nystrom interpolant 1 - (1/2pi) int K(x - mu) Z(mu) dmu.
inline double z_interpolant(double x, const TBAGrid& g, const Eigen::VectorXd& Z, double gamma) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < Z.size(); ++j) s += tba_kernel(x - g.lambda(j), gamma) * g.weights(j) * Z(j);
  return 1.0 - s / (2.0 * std::numbers::pi);
}

inline double z_boundary_target(double Lambda, double delta, double gamma, double h) {
  return std::numbers::pi * std::sqrt(1.0 - delta * delta) /
         (4.0 * gamma * h * std::cosh(0.5 * std::numbers::pi * Lambda / gamma));
}

inline double rho_driving(double l, double gamma) {
  return std::sin(gamma) / (2.0 * std::numbers::pi * (std::cosh(l) - std::cos(gamma)));
}
inline double eps_driving(double l, double gamma, double h) {
  return 2.0 * h - std::pow(std::sin(gamma), 2) / (std::cosh(l) - std::cos(gamma));
}
inline double eps_driving_derivative(double l, double gamma) {
  const double den = std::cosh(l) - std::cos(gamma);
  return std::pow(std::sin(gamma), 2) * std::sinh(l) / (den * den);
}

}  // namespace detail

/// Max residual of the three discretized integral equations on the profile grid.
inline double tba_residual(const TBAProfile& p) {
  const int n = static_cast<int>(p.lambda.size());
  double r = 0.0;
  for (int i = 0; i < n; ++i) {
    double sz = 0.0, sr = 0.0, se = 0.0;
    for (int j = 0; j < n; ++j) {
      const double k = tba_kernel(p.lambda(i) - p.lambda(j), p.gamma) * p.weights(j) / (2.0 * std::numbers::pi);
      sz += k * p.Z(j);
      sr += k * p.rho(j);
      se += k * p.eps(j);
    }
    r = std::max({r, std::abs(p.Z(i) + sz - 1.0),
                  std::abs(p.rho(i) + sr - detail::rho_driving(p.lambda(i), p.gamma)),
                  std::abs(p.eps(i) + se - detail::eps_driving(p.lambda(i), p.gamma, p.input.h))});
  }
  return r;
}

/// Solves the dressing equations. For h > 0 the Z solve alternates with a
/// bisection of Z(Lambda) = pi sqrt(1 - Delta^2) / (4 gamma h cosh(pi Lambda / 2 gamma))
/// on [0, lambda_max]; h = 0 uses Lambda = lambda_max.
inline TBAProfile solve_dressing(const TBAInput& in) {
  in.validate();
  const double gamma = in.gamma_tba();
  const int n = in.grid;
  TBAProfile p;
  p.input = in;
  p.gamma = gamma;

  int used = 0;
  double Lambda = in.lambda_max;
  detail::TBAGrid grid;
  Eigen::VectorXd Z;
  if (in.h == 0.0) {
    grid = detail::make_tba_grid(Lambda, n, gamma);
    Z = detail::fixed_point(grid.kw, Eigen::VectorXd::Ones(n), in.tolerance, in.max_iterations, used);
    p.iterations += used;
  } else {
    auto target = [&](double L) { return detail::z_boundary_target(L, in.delta, gamma, in.h); };
    // Start from Z = 1.
    const double c0 = std::numbers::pi * std::sqrt(1.0 - in.delta * in.delta) / (4.0 * gamma * in.h);
    Lambda = c0 > 1.0 ? std::min(in.lambda_max, 2.0 * gamma / std::numbers::pi * std::acosh(c0)) : 0.0;
    bool converged = false;
    for (int outer = 0; outer < 50; ++outer) {
      const double L = std::max(Lambda, 1e-3);
      grid = detail::make_tba_grid(L, n, gamma);
      Z = detail::fixed_point(grid.kw, Eigen::VectorXd::Ones(n), in.tolerance, in.max_iterations, used);
      p.iterations += used;
      auto f = [&](double x) { return detail::z_interpolant(x, grid, Z, gamma) - target(x); };
      double next;
      if (f(0.0) >= 0.0) {
        next = 0.0;
      } else if (f(in.lambda_max) <= 0.0) {
        next = in.lambda_max;
      } else {
        double lo = 0.0, hi = in.lambda_max;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          (f(mid) < 0.0 ? lo : hi) = mid;
        }
        next = 0.5 * (lo + hi);
      }
      const double change = std::abs(next - Lambda);
      Lambda = next;
      if (change < 1e-12 * std::max(1.0, Lambda)) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      // Near saturation the alternation can cycle; solve the self-consistent
      // boundary equation directly instead, with Z re-solved per trial Lambda.
      auto g = [&](double L) {
        grid = detail::make_tba_grid(L, n, gamma);
        Z = detail::fixed_point(grid.kw, Eigen::VectorXd::Ones(n), in.tolerance, in.max_iterations, used);
        p.iterations += used;
        return Z(n - 1) - target(L);
      };
      const double lo = 1e-6, hi = in.lambda_max;
      const double g_lo = g(lo), g_hi = g(hi);
      if (g_lo >= 0.0) {
        Lambda = 0.0;
      } else if (g_hi <= 0.0) {
        Lambda = hi;
      } else {
        std::uintmax_t max_it = 200;
        const auto r = boost::math::tools::toms748_solve(
            g, lo, hi, g_lo, g_hi, boost::math::tools::eps_tolerance<double>(50), max_it);
        if (max_it >= 200) throw TBAError("solve_dressing: boundary equation did not converge");
        Lambda = 0.5 * (r.first + r.second);
      }
    }
    if (Lambda == 0.0) {
      p.saturated = true;
      p.Lambda = 0.0;
      return p;
    }
    if (grid.lambda(n - 1) != Lambda) {
      grid = detail::make_tba_grid(Lambda, n, gamma);
      Z = detail::fixed_point(grid.kw, Eigen::VectorXd::Ones(n), in.tolerance, in.max_iterations, used);
    }
  }

  p.Lambda = Lambda;
  p.lambda = grid.lambda;
  p.weights = grid.weights;
  p.Z = Z;
  Eigen::VectorXd rho0(n), eps0(n);
  for (int i = 0; i < n; ++i) {
    rho0(i) = detail::rho_driving(grid.lambda(i), gamma);
    eps0(i) = detail::eps_driving(grid.lambda(i), gamma, in.h);
  }
  p.rho = detail::fixed_point(grid.kw, rho0, in.tolerance, in.max_iterations, used);
  p.iterations += used;
  p.eps = detail::fixed_point(grid.kw, eps0, in.tolerance, in.max_iterations, used);
  p.iterations += used;

  p.zeta = Z(n - 1);
  p.zeta_sq = p.zeta * p.zeta;
  p.m = p.weights.dot(p.rho);
  p.eps_at_Lambda = p.eps(n - 1);

  // Derivative of eps from the differentiated integral equation. At h = 0 the
  // edge density underflows, so the ratio is taken at the outermost point
  // where rho is still resolved.
  int at = n - 1;
  if (in.h == 0.0)
    while (at > n / 2 && p.rho(at) < 1e-8) --at;
  const double x = p.lambda(at);
  double conv = 0.0;
  for (int j = 0; j < n; ++j) conv += tba_kernel_derivative(x - p.lambda(j), gamma) * p.weights(j) * p.eps(j);
  const double deps = detail::eps_driving_derivative(x, gamma) - conv / (2.0 * std::numbers::pi);
  if (p.rho(at) < 1e-12) throw TBAError("observables: rho at the evaluation point below 1e-12");
  p.v_F = deps / (2.0 * std::numbers::pi * p.rho(at));
  p.vf_lambda = x;
  p.residual = tba_residual(p);
  return p;
}

struct TBAObservables {
  double v_F = 0.0;
  double zeta_sq = 0.0;
  double m = 0.0;
};

inline TBAObservables observables(const TBAProfile& p) {
  if (p.saturated) throw TBAError("observables: saturated profile has no Fermi points");
  return {p.v_F, p.zeta_sq, p.m};
}

/// Largest change produced by one more application of the iteration map.
inline double fixed_point_drift(const TBAProfile& p) {
  const int n = static_cast<int>(p.lambda.size());
  double drift = 0.0;
  for (int i = 0; i < n; ++i) {
    double sz = 0.0, sr = 0.0, se = 0.0;
    for (int j = 0; j < n; ++j) {
      const double k = tba_kernel(p.lambda(i) - p.lambda(j), p.gamma) * p.weights(j) / (2.0 * std::numbers::pi);
      sz += k * p.Z(j);
      sr += k * p.rho(j);
      se += k * p.eps(j);
    }
    drift = std::max({drift, std::abs(1.0 - sz - p.Z(i)),
                      std::abs(detail::rho_driving(p.lambda(i), p.gamma) - sr - p.rho(i)),
                      std::abs(detail::eps_driving(p.lambda(i), p.gamma, p.input.h) - se - p.eps(i))});
  }
  return drift;
}

struct ExcitationLabels {
  int n_m = 0;
  int d = 0;
  int n_plus = 0;
  int n_minus = 0;
};

/// 2 pi v_F (N_M^2 / (4 Z^2) + Z^2 d^2 + N^+ + N^-) / N.
inline double excitation_energy(double v_F, double zeta, const ExcitationLabels& l, int n) {
  if (n < 1) throw std::invalid_argument("excitation_energy: N must be positive");
  if (l.n_plus < 0 || l.n_minus < 0) throw std::invalid_argument("excitation_energy: negative N+-");
  const double z2 = zeta * zeta;
  return 2.0 * std::numbers::pi * v_F *
         (l.n_m * l.n_m / (4.0 * z2) + z2 * l.d * l.d + l.n_plus + l.n_minus) / n;
}

/// Lowest N_M = 0 excitation: one particle-hole pair or one backscattering.
inline double sector_gap_prediction(const TBAProfile& p, int n) {
  const double a = excitation_energy(p.v_F, p.zeta, {0, 0, 1, 0}, n);
  const double b = excitation_energy(p.v_F, p.zeta, {0, 1, 0, 0}, n);
  return std::min(a, b);
}

/// Field h giving magnon density m_target, by bisection on h in (0, h_hi].
inline TBAProfile solve_for_density(TBAInput in, double m_target, double h_hi = 2.0) {
  if (!(m_target > 0.0 && m_target < 0.5)) throw std::invalid_argument("solve_for_density: m must be in (0, 1/2)");
  double lo = 0.0, hi = h_hi;
  TBAProfile best;
  for (int it = 0; it < 60; ++it) {
    in.h = 0.5 * (lo + hi);
    best = solve_dressing(in);
    const double m = best.saturated ? 0.0 : best.m;
    (m > m_target ? lo : hi) = in.h;
    if (hi - lo < 1e-12) break;
  }
  return best;
}

inline std::vector<TBAProfile> tba_sweep(const std::vector<double>& deltas, const std::vector<double>& hs,
                                         const TBAInput& base, unsigned threads = 1) {
  std::vector<TBAProfile> out(deltas.size() * hs.size());
  parallel_for(out.size(), threads, [&](std::size_t idx) {
    TBAInput in = base;
    in.delta = deltas[idx / hs.size()];
    in.h = hs[idx % hs.size()];
    out[idx] = solve_dressing(in);
  });
  return out;
}

inline CsvTable tba_sweep_csv(const std::vector<TBAProfile>& profiles) {
  CsvTable t({"delta", "h", "Lambda", "v_F", "Zeta2", "m", "residual", "iterations"});
  for (const auto& p : profiles)
    t.row(p.input.delta, p.input.h, p.Lambda, p.v_F, p.zeta_sq, p.m, p.residual, p.iterations);
  return t;
}

}  // namespace iprep
