#pragma once

// Quadratic Bethe equations of the spin-1/2 Richardson-Gaudin models, solved
// by continuation in the coupling g from every binary seed.
//
// Seeds: bit (N - k) of the seed word is q^(k)(0), k = 1..N, so site 1 is the
// most significant bit as for basis indices. A set seed bit means spin up,
// i.e. the complement of the computational basis index of the product state.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "iprep/models.hpp"
#include "iprep/parallel.hpp"

namespace iprep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ContinuationPolicy {
  double initial_dg = 1e-3;
  double adaption = 0.9;
  double residual_tol = 1e-14;  // on the squared residual norm
  int taylor_order = 1;
  std::optional<double> max_dg;
  double collision_tol = 1e-6;  // Euclidean distance between root vectors
  double min_dg = 1e-12;
  int max_lm_iterations = 60;

  void validate() const {
    if (!(adaption > 0.0 && adaption < 1.0))
      throw std::invalid_argument("ContinuationPolicy: adaption factor must be in (0, 1)");
    if (!(residual_tol > 0.0) || !(collision_tol > 0.0) || !(min_dg > 0.0))
      throw std::invalid_argument("ContinuationPolicy: tolerances must be positive");
    if (!(initial_dg > 0.0)) throw std::invalid_argument("ContinuationPolicy: initial_dg <= 0");
    if (taylor_order != 0 && taylor_order != 1)
      throw std::invalid_argument("ContinuationPolicy: taylor order must be 0 or 1");
    if (max_dg && !(*max_dg > 0.0)) throw std::invalid_argument("ContinuationPolicy: max_dg <= 0");
  }
};

/// Step cap that samples the crossover region: min|eps_i - eps_j| / (20 N).
inline double default_max_dg(const RGModelSpec& spec) {
  return spec.min_spacing() / (20.0 * static_cast<double>(spec.size()));
}

/// End of the adiabatic path: five times the latest crossover scale
/// max|eps_i - eps_j| / N.
inline double default_g_target(const RGModelSpec& spec) {
  return 5.0 * spec.max_spacing() / static_cast<double>(spec.size());
}

inline ContinuationPolicy path_policy(const RGModelSpec& spec) {
  ContinuationPolicy p;
  p.max_dg = default_max_dg(spec);
  p.initial_dg = *p.max_dg;
  return p;
}

struct BetheState {
  VectorXd q;
  double g = 0.0;
  int M = 0;
  std::uint64_t seed = 0;
  double residual_sq = 0.0;
  std::optional<double> smale_bound;
};

inline std::uint64_t seed_bit(std::size_t n, std::size_t k) { return std::uint64_t{1} << (n - k); }

inline VectorXd seed_vector(std::size_t n, std::uint64_t seed) {
  VectorXd q(static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k <= n; ++k) q(static_cast<Eigen::Index>(k - 1)) = (seed & seed_bit(n, k)) ? 1.0 : 0.0;
  return q;
}

/// Components k <= N: q_k^2 - q_k + (g/2) sum_{j != k} (q_k - q_j)/(eps_k - eps_j);
/// component N+1: sum_k q_k - M.
inline VectorXd qbe_residual(const VectorXd& q, double g, const RGModelSpec& spec, int M) {
  const auto n = static_cast<Eigen::Index>(spec.size());
  if (q.size() != n) throw std::invalid_argument("qbe_residual: size mismatch");
  const auto eps = spec.epsilons();
  VectorXd r(n + 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != k) s += (q(k) - q(j)) / (eps[k] - eps[j]);
    r(k) = q(k) * q(k) - q(k) + 0.5 * g * s;
  }
  r(n) = q.sum() - M;
  return r;
}

/// (N+1) x N Jacobian of qbe_residual with respect to q.
inline MatrixXd qbe_jacobian(const VectorXd& q, double g, const RGModelSpec& spec) {
  const auto n = static_cast<Eigen::Index>(spec.size());
  const auto eps = spec.epsilons();
  MatrixXd jac(n + 1, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double diag = 2.0 * q(k) - 1.0;
    for (Eigen::Index l = 0; l < n; ++l) {
      if (l == k) continue;
      const double w = 0.5 * g / (eps[k] - eps[l]);
      diag += w;
      jac(k, l) = -w;
    }
    jac(k, k) = diag;
  }
  jac.row(n).setOnes();
  return jac;
}

/// Partial derivative of the residual with respect to g at fixed q.
inline VectorXd qbe_dg(const VectorXd& q, const RGModelSpec& spec) {
  const auto n = static_cast<Eigen::Index>(spec.size());
  const auto eps = spec.epsilons();
  VectorXd d = VectorXd::Zero(n + 1);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != k) d(k) += 0.5 * (q(k) - q(j)) / (eps[k] - eps[j]);
  return d;
}

struct SingularValues {
  double min = 0.0;
  double max = 0.0;
  double condition() const { return min > 0.0 ? max / min : std::numeric_limits<double>::infinity(); }
};

inline SingularValues singular_values(const MatrixXd& jac) {
  Eigen::JacobiSVD<MatrixXd> svd(jac);
  const auto& s = svd.singularValues();
  return {s(s.size() - 1), s(0)};
}

inline constexpr double kSingularThreshold = 1e-13;

struct TaylorPrediction {
  VectorXd q;
  double condition_number = 1.0;
  bool ok = true;  // false: singular Jacobian, q is the order-0 copy
};

/// Order 0 copies q. Order 1 solves J dq/dg = -dF/dg in the least-squares
/// sense and steps by dg.
inline TaylorPrediction taylor_predict(const BetheState& state, double dg, int order,
                                       const RGModelSpec& spec) {
  if (order == 0) return {state.q, 1.0, true};
  if (order != 1) throw std::invalid_argument("taylor_predict: order must be 0 or 1");
  const MatrixXd jac = qbe_jacobian(state.q, state.g, spec);
  Eigen::JacobiSVD<MatrixXd> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1), smax = s(0);
  if (smin < kSingularThreshold)
    return {state.q, std::numeric_limits<double>::infinity(), false};
  const VectorXd dq = svd.solve(-qbe_dg(state.q, spec));
  return {state.q + dg * dq, smax / smin, true};
}

struct RefineResult {
  VectorXd q;
  double residual_sq = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt on ||F(q)||^2. Damping starts at 1e-3, halves on an
/// accepted iteration and doubles on a rejected one. Once below tolerance a
/// few extra accepted iterations polish the root.
inline RefineResult refine_root(VectorXd q, double g, const RGModelSpec& spec, int M,
                                const ContinuationPolicy& policy) {
  VectorXd r = qbe_residual(q, g, spec, M);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  int polish = 0;
  int it = 0;
  for (; it < policy.max_lm_iterations; ++it) {
    if (cost <= policy.residual_tol) {
      if (cost < 1e-30 || polish >= 2) break;
      ++polish;
    }
    const MatrixXd jac = qbe_jacobian(q, g, spec);
    MatrixXd normal = jac.transpose() * jac;
    normal.diagonal().array() += mu;
    const VectorXd step = normal.ldlt().solve(-jac.transpose() * r);
    const VectorXd trial = q + step;
    const VectorXd r_trial = qbe_residual(trial, g, spec, M);
    const double cost_trial = r_trial.squaredNorm();
    if (cost_trial < cost) {
      q = trial;
      r = r_trial;
      cost = cost_trial;
      mu *= 0.5;
    } else {
      mu *= 2.0;
      if (cost <= policy.residual_tol) break;  // converged; no further progress
    }
    if (step.norm() < 1e-16 * std::max(1.0, q.norm()) && cost <= policy.residual_tol) break;
  }
  return {std::move(q), cost, it, cost <= policy.residual_tol};
}

/// Undamped Newton steps on an already converged root, kept while the
/// residual keeps dropping. Damped refinement stalls near 1e-9 when the
/// Jacobian has singular values below sqrt(mu); reported states need better.
inline VectorXd newton_polish(VectorXd q, double g, const RGModelSpec& spec, int M, int max_steps = 4) {
  VectorXd r = qbe_residual(q, g, spec, M);
  double cost = r.squaredNorm();
  for (int i = 0; i < max_steps && cost > 1e-30; ++i) {
    const VectorXd trial = q - qbe_jacobian(q, g, spec).colPivHouseholderQr().solve(r);
    const VectorXd r_trial = qbe_residual(trial, g, spec, M);
    if (!(r_trial.squaredNorm() < cost)) break;
    q = trial;
    r = r_trial;
    cost = r.squaredNorm();
  }
  return q;
}

class ContinuationError : public std::runtime_error {
 public:
  ContinuationError(std::uint64_t seed, double g_reached, const std::string& what)
      : std::runtime_error(what), seed_(seed), g_(g_reached) {}
  std::uint64_t seed() const { return seed_; }
  double g_reached() const { return g_; }

 private:
  std::uint64_t seed_;
  double g_;
};

struct Trajectory {
  std::vector<BetheState> states;
  std::vector<double> attempted_dg;  // every attempted step, accepted or not
  std::vector<bool> accepted;
};

/// Continues a converged state from its coupling to g_target.
inline Trajectory continue_from(const BetheState& start, const RGModelSpec& spec, double g_target,
                                const ContinuationPolicy& policy) {
  policy.validate();
  if (g_target < start.g) throw std::invalid_argument("continue_from: g_target below the start coupling");
  Trajectory traj;
  BetheState cur = start;
  traj.states.push_back(cur);
  double dg = policy.initial_dg;
  if (policy.max_dg) dg = std::min(dg, *policy.max_dg);
  while (cur.g < g_target) {
    const double step = std::min(dg, g_target - cur.g);
    traj.attempted_dg.push_back(step);
    TaylorPrediction pred = taylor_predict(cur, step, policy.taylor_order, spec);
    const double g_next = (g_target - cur.g <= dg) ? g_target : cur.g + step;
    RefineResult res = refine_root(pred.q, g_next, spec, cur.M, policy);
    if (res.converged) {
      traj.accepted.push_back(true);
      cur = BetheState{std::move(res.q), g_next, cur.M, cur.seed, res.residual_sq, std::nullopt};
      traj.states.push_back(cur);
      dg = step / policy.adaption;
      if (policy.max_dg) dg = std::min(dg, *policy.max_dg);
    } else {
      traj.accepted.push_back(false);
      dg = step * policy.adaption;
      if (dg < policy.min_dg) {
        std::ostringstream os;
        os << "continuation step underflow for seed " << cur.seed << " at g = " << cur.g;
        throw ContinuationError(cur.seed, cur.g, os.str());
      }
    }
  }
  return traj;
}

inline BetheState seed_state(std::uint64_t seed, std::size_t n) {
  if (n < 64 && seed >> n) throw std::invalid_argument("seed has bits beyond N sites");
  return BetheState{seed_vector(n, seed), 0.0, std::popcount(seed), seed, 0.0, std::nullopt};
}

/// Tracks one seed from g = 0 to g_target.
inline Trajectory continue_solution(std::uint64_t seed, const RGModelSpec& spec, double g_target,
                                    const ContinuationPolicy& policy) {
  if (g_target < 0.0) throw std::invalid_argument("continue_solution: g_target < 0");
  return continue_from(seed_state(seed, spec.size()), spec, g_target, policy);
}

struct GapRow {
  double g = 0.0;
  double min_gap = 0.0;  // min over pairs of ||q_a - q_b||^2
  std::uint64_t seed_a = 0;
  std::uint64_t seed_b = 0;
  double dg_used = 0.0;
};

struct PairMinimum {
  double dist_sq = std::numeric_limits<double>::infinity();
  std::size_t a = 0, b = 0;
  std::size_t magnetization_violations = 0;
};

/// Minimum squared distance over all column pairs of q (N x count), plus a
/// count of cross-sector pairs violating ||q_a - q_b||^2 >= (M_a - M_b)^2 / N.
inline PairMinimum pairwise_minimum(const MatrixXd& q, const std::vector<int>& M) {
  PairMinimum best;
  const Eigen::Index count = q.cols();
  const double n = static_cast<double>(q.rows());
  for (Eigen::Index a = 0; a < count; ++a)
    for (Eigen::Index b = a + 1; b < count; ++b) {
      const double d = (q.col(a) - q.col(b)).squaredNorm();
      if (d < best.dist_sq) best = {d, static_cast<std::size_t>(a), static_cast<std::size_t>(b),
                                    best.magnetization_violations};
      if (M[a] != M[b]) {
        const double dm = M[a] - M[b];
        if (d < dm * dm / n - 1e-12) ++best.magnetization_violations;
      }
    }
  return best;
}

struct GapScan {
  std::size_t n_sites = 0;
  double g_target = 0.0;
  std::vector<GapRow> rows;                // one per accepted g, starting at g = 0
  std::vector<BetheState> final_states;    // index == seed
  std::vector<std::pair<double, std::vector<BetheState>>> snapshots;  // at requested checkpoints
  GapRow path_min;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  double min_dg = std::numeric_limits<double>::infinity();
  double max_condition = 0.0;
  std::size_t magnetization_violations = 0;

  /// Largest increase of the per-g minimum gap between consecutive rows.
  double max_monotonicity_violation() const {
    double worst = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i)
      worst = std::max(worst, rows[i].min_gap - rows[i - 1].min_gap);
    return worst;
  }
};

class ScanError : public std::runtime_error {
 public:
  ScanError(double g, std::uint64_t a, std::uint64_t b, const std::string& what)
      : std::runtime_error(what), g_(g), a_(a), b_(b) {}
  double g_reached() const { return g_; }
  std::uint64_t seed_a() const { return a_; }
  std::uint64_t seed_b() const { return b_; }

 private:
  double g_;
  std::uint64_t a_, b_;
};

struct ScanOptions {
  std::size_t scan_limit = 14;
  unsigned threads = 1;
  std::vector<double> checkpoints;  // g values the scan lands on exactly and snapshots
  /// Called after every accepted step (and at g = 0) with the N x 2^N root matrix.
  std::function<void(double g, const MatrixXd& q, const std::vector<int>& M)> observer;
};

/// Continues all 2^N seeds on a shared g grid. A step is rejected for every
/// seed if any refinement misses tolerance or any two roots come closer than
/// the collision tolerance.
inline GapScan full_spectrum_scan(const RGModelSpec& spec, double g_target,
                                  const ContinuationPolicy& policy, const ScanOptions& opts = {}) {
  policy.validate();
  const std::size_t n = spec.size();
  if (n > opts.scan_limit)
    throw std::length_error("full_spectrum_scan: N exceeds scan limit");
  if (g_target < 0.0) throw std::invalid_argument("full_spectrum_scan: g_target < 0");
  const std::size_t count = std::size_t{1} << n;
  const auto cols = static_cast<Eigen::Index>(count);

  MatrixXd q(static_cast<Eigen::Index>(n), cols);
  std::vector<int> M(count);
  for (std::size_t s = 0; s < count; ++s) {
    q.col(static_cast<Eigen::Index>(s)) = seed_vector(n, s);
    M[s] = std::popcount(s);
  }

  std::vector<double> checkpoints;
  for (double c : opts.checkpoints)
    if (c > 0.0 && c <= g_target) checkpoints.push_back(c);
  std::sort(checkpoints.begin(), checkpoints.end());
  std::size_t next_cp = 0;

  GapScan scan;
  scan.n_sites = n;
  scan.g_target = g_target;
  auto snapshot = [&](double g) {
    std::vector<BetheState> states(count);
    for (std::size_t s = 0; s < count; ++s)
      states[s] = BetheState{newton_polish(q.col(static_cast<Eigen::Index>(s)), g, spec, M[s]), g, M[s], s, 0.0,
                             std::nullopt};
    return states;
  };

  {
    PairMinimum pm = pairwise_minimum(q, M);
    scan.rows.push_back({0.0, pm.dist_sq, pm.a, pm.b, 0.0});
    scan.path_min = scan.rows.back();
    if (opts.observer) opts.observer(0.0, q, M);
  }

  double g = 0.0;
  double dg = policy.initial_dg;
  if (policy.max_dg) dg = std::min(dg, *policy.max_dg);
  MatrixXd trial(q.rows(), q.cols());
  std::vector<double> residuals(count), conditions(count);
  std::vector<char> ok(count);

  while (g < g_target) {
    double g_next = g + dg;
    bool landing = false;
    if (next_cp < checkpoints.size() && g_next >= checkpoints[next_cp]) {
      g_next = checkpoints[next_cp];
      landing = true;
    }
    if (g_next >= g_target) g_next = g_target;
    const double step = g_next - g;

    parallel_for(count, opts.threads, [&](std::size_t s) {
      const auto c = static_cast<Eigen::Index>(s);
      BetheState cur{q.col(c), g, M[s], s, 0.0, std::nullopt};
      TaylorPrediction pred = taylor_predict(cur, step, policy.taylor_order, spec);
      RefineResult res = refine_root(std::move(pred.q), g_next, spec, M[s], policy);
      trial.col(c) = res.q;
      residuals[s] = res.residual_sq;
      conditions[s] = pred.ok ? pred.condition_number : 0.0;
      ok[s] = res.converged ? 1 : 0;
    });

    bool accept = std::all_of(ok.begin(), ok.end(), [](char c) { return c != 0; });
    PairMinimum pm;
    if (accept) {
      pm = pairwise_minimum(trial, M);
      if (std::sqrt(pm.dist_sq) < policy.collision_tol) accept = false;
    }

    if (!accept) {
      ++scan.rejected_steps;
      dg = step * policy.adaption;
      if (dg < policy.min_dg) {
        std::ostringstream os;
        if (pm.dist_sq < std::numeric_limits<double>::infinity())
          os << "collision between seeds " << pm.a << " and " << pm.b << " unresolved at g = " << g;
        else
          os << "refinement failed at minimal step, g = " << g;
        throw ScanError(g, pm.a, pm.b, os.str());
      }
      continue;
    }

    q.swap(trial);
    g = g_next;
    ++scan.accepted_steps;
    scan.min_dg = std::min(scan.min_dg, step);
    scan.max_condition =
        std::max(scan.max_condition, *std::max_element(conditions.begin(), conditions.end()));
    scan.magnetization_violations += pm.magnetization_violations;
    scan.rows.push_back({g, pm.dist_sq, pm.a, pm.b, step});
    if (pm.dist_sq < scan.path_min.min_gap) scan.path_min = scan.rows.back();
    if (opts.observer) opts.observer(g, q, M);
    if (landing) {
      scan.snapshots.emplace_back(g, snapshot(g));
      ++next_cp;
    }
    if (!landing || g < g_target) {
      dg = step / policy.adaption;
      if (policy.max_dg) dg = std::min(dg, *policy.max_dg);
    }
  }

  scan.final_states = snapshot(g);
  for (std::size_t s = 0; s < count; ++s)
    scan.final_states[s].residual_sq =
        qbe_residual(scan.final_states[s].q, g, spec, M[s]).squaredNorm();
  return scan;
}

/// (M - M')^2 / N.
inline double magnetization_bound(int M, int M2, std::size_t n) {
  const double d = M - M2;
  return d * d / static_cast<double>(n);
}

struct PerturbativeCertificate {
  bool certified = false;
  double threshold = 0.0;
};

/// threshold = min|eps_k - eps_j| / (2 (2 + sqrt 5) N^2); certified iff g < threshold.
inline PerturbativeCertificate perturbative_certificate(const RGModelSpec& spec, double g) {
  const double n = static_cast<double>(spec.size());
  const double t = spec.min_spacing() / (2.0 * (2.0 + std::sqrt(5.0)) * n * n);
  return {g < t, t};
}

/// Limiting minimal gap of the parent Hamiltonian for g -> infinity.
inline double large_g_limit_gap(std::size_t n) {
  if (n < 2) throw std::invalid_argument("large_g_limit_gap: need N >= 2");
  return 1.0 / static_cast<double>(n);
}

/// ||a_M - a_{M+1}||^2 for the Dicke-state limits a_M = (M/N)(1, ..., 1).
inline double dicke_witness_distance(std::size_t n, int M) {
  const double nn = static_cast<double>(n);
  const VectorXd a = VectorXd::Constant(static_cast<Eigen::Index>(n), M / nn);
  const VectorXd b = VectorXd::Constant(static_cast<Eigen::Index>(n), (M + 1) / nn);
  return (a - b).squaredNorm();
}

inline const double kSmalePrefactor = (5.0 - std::sqrt(17.0)) / 4.0;

struct SmaleBound {
  double bound = 0.0;
  bool singular = false;
};

/// ((5 - sqrt 17)/2) sigma_min(Df) / ||D^2 f|| with ||D^2 f|| = 2, sigma_min
/// over the full (N+1) x N Jacobian. Lower-bounds the distance to any other root.
inline SmaleBound smale_lower_bound(const BetheState& state, const RGModelSpec& spec) {
  const SingularValues sv = singular_values(qbe_jacobian(state.q, state.g, spec));
  if (sv.min < kSingularThreshold) return {0.0, true};
  return {kSmalePrefactor * sv.min, false};
}

struct SmaleAudit {
  double min_bound = std::numeric_limits<double>::infinity();
  double min_distance = std::numeric_limits<double>::infinity();  // same-sector pairs, Euclidean
  std::size_t violations = 0;        // bound above the nearest same-sector root
  std::size_t cross_sector_excess = 0;  // bound above a root of another sector (no guarantee there)
  std::size_t singular = 0;
};

/// Smale bound of every root (columns of q) against its nearest root of the
/// same system, i.e. with equal M. Roots with other M solve a different
/// constraint row and are only counted for information.
inline SmaleAudit smale_audit_step(const MatrixXd& q, const std::vector<int>& M, double g,
                                   const RGModelSpec& spec) {
  SmaleAudit a;
  const Eigen::Index count = q.cols();
  for (Eigen::Index v = 0; v < count; ++v) {
    const auto sv = static_cast<std::size_t>(v);
    double same = std::numeric_limits<double>::infinity(), other = same;
    for (Eigen::Index w = 0; w < count; ++w) {
      if (w == v) continue;
      const double d = (q.col(v) - q.col(w)).norm();
      double& slot = M[static_cast<std::size_t>(w)] == M[sv] ? same : other;
      slot = std::min(slot, d);
    }
    const BetheState st{q.col(v), g, M[sv], static_cast<std::uint64_t>(v), 0.0, std::nullopt};
    const SmaleBound b = smale_lower_bound(st, spec);
    a.singular += b.singular;
    a.min_bound = std::min(a.min_bound, b.bound);
    if (same < std::numeric_limits<double>::infinity()) a.min_distance = std::min(a.min_distance, same);
    if (b.bound > same) ++a.violations;
    if (b.bound > other) ++a.cross_sector_excess;
  }
  return a;
}

}  // namespace iprep
