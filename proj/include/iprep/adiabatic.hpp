#pragma once

// Adiabatic state preparation on dense state vectors: linear schedules,
// first-order product formulas with midpoint parameters, fidelity tracking,
// and runtime / depth estimates.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "iprep/csv.hpp"
#include "iprep/dense.hpp"
#include "iprep/models.hpp"
#include "iprep/pauli.hpp"
#include "iprep/rg_solver.hpp"

namespace iprep {

struct Schedule {
  double g_start = 0.0;
  double g_end = 1.0;
  double T = 1.0;

  void validate() const {
    if (!(T > 0.0)) throw std::invalid_argument("Schedule: T must be positive");
  }
  double g_at(double t) const { return g_start + (g_end - g_start) * (t / T); }
};

using HamiltonianFamily = std::function<PauliOperator(double g)>;
using TargetFamily = std::function<VectorC(double g)>;

/// Order of exponentials inside a slice. flip_grouped sorts by the X-part of
/// the symplectic representation first, so strings that flip the same spins
/// (X_i X_j and Y_i Y_j) are applied back to back.
enum class TermOrder { lexicographic, flip_grouped };

inline std::vector<std::pair<PauliString, double>> ordered_terms(const PauliOperator& op, TermOrder order) {
  std::vector<std::pair<PauliString, double>> terms(op.terms().begin(), op.terms().end());
  if (order == TermOrder::flip_grouped)
    std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
      if (a.first.x_mask() != b.first.x_mask()) return a.first.x_mask() < b.first.x_mask();
      return a.first.z_mask() < b.first.z_mask();
    });
  return terms;
}

/// psi <- exp(-i theta P) psi = cos(theta) psi - i sin(theta) P psi.
inline void apply_pauli_rotation(VectorC& psi, const PauliString& p, double theta, VectorC& scratch) {
  const double c = std::cos(theta), s = std::sin(theta);
  if (p.is_identity()) {
    psi *= cplx{c, -s};
    return;
  }
  const std::uint64_t dim = static_cast<std::uint64_t>(psi.size());
  scratch.resize(psi.size());
  for (std::uint64_t b = 0; b < dim; ++b) {
    auto [b2, ph] = p.act(b);
    scratch(static_cast<Eigen::Index>(b2)) = ph * psi(static_cast<Eigen::Index>(b));
  }
  psi = c * psi + cplx{0.0, -s} * scratch;
}

/// One first-order product-formula slice of length dt.
inline void trotter_slice(VectorC& psi, const PauliOperator& h, double dt, TermOrder order, VectorC& scratch) {
  for (const auto& [s, c] : ordered_terms(h, order)) apply_pauli_rotation(psi, s, dt * c, scratch);
}

struct Checkpoint {
  double t = 0.0;
  double g = 0.0;
  double fidelity = -1.0;  // -1 when no target is supplied
  double norm = 1.0;
};

struct EvolutionReport {
  VectorC final_state;
  double final_fidelity = -1.0;
  std::size_t steps = 0;
  double dt = 0.0;
  std::vector<Checkpoint> checkpoints;
  double max_norm_drift = 0.0;
};

struct EvolveOptions {
  std::size_t checkpoint_every = 0;  // slices between checkpoints, 0 for final only
  TargetFamily target;               // instantaneous target state, optional
  TermOrder order = TermOrder::flip_grouped;
  std::size_t dense_limit = kDefaultDenseLimit;
};

inline double fidelity(const VectorC& a, const VectorC& b) { return std::norm(a.dot(b)); }

inline EvolutionReport evolve(const VectorC& initial, const HamiltonianFamily& family, const Schedule& sched,
                              std::size_t steps, const EvolveOptions& opts = {}) {
  sched.validate();
  if (steps < 1) throw std::invalid_argument("evolve: steps must be at least 1");
  const auto dim = static_cast<std::uint64_t>(initial.size());
  if (dim == 0 || (dim & (dim - 1)) != 0) throw std::invalid_argument("evolve: state dimension not a power of two");
  const auto n = static_cast<std::size_t>(std::countr_zero(dim));
  if (n > opts.dense_limit) throw std::length_error("evolve: state exceeds dense limit");
  if (std::abs(initial.norm() - 1.0) > 1e-10) throw std::invalid_argument("evolve: initial state not normalized");

  EvolutionReport rep;
  rep.steps = steps;
  rep.dt = sched.T / static_cast<double>(steps);
  VectorC psi = initial, scratch;
  auto record = [&](double t) {
    Checkpoint cp{t, sched.g_at(t), -1.0, psi.norm()};
    if (opts.target) cp.fidelity = fidelity(opts.target(cp.g), psi);
    rep.checkpoints.push_back(cp);
  };
  if (opts.checkpoint_every) record(0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t_mid = (static_cast<double>(s) + 0.5) * rep.dt;
    const PauliOperator h = family(sched.g_at(t_mid));
    if (h.n_sites() != n) throw std::invalid_argument("evolve: Hamiltonian and state sizes differ");
    trotter_slice(psi, h, rep.dt, opts.order, scratch);
    rep.max_norm_drift = std::max(rep.max_norm_drift, std::abs(psi.norm() - 1.0));
    if (opts.checkpoint_every && (s + 1) % opts.checkpoint_every == 0 && s + 1 < steps)
      record(static_cast<double>(s + 1) * rep.dt);
  }
  record(sched.T);
  rep.final_fidelity = rep.checkpoints.back().fidelity;
  rep.final_state = std::move(psi);
  return rep;
}

/// Commutator bound of the first-order formula for a fixed Hamiltonian:
/// ||U_exact - U_trotter|| <= T dt sum over anticommuting pairs |c_j c_k|.
inline double trotter_error_bound(const PauliOperator& h, double T, std::size_t steps) {
  std::vector<std::pair<PauliString, double>> terms;
  for (const auto& [s, c] : h.terms())
    if (!s.is_identity()) terms.emplace_back(s, c);
  double sum = 0.0;
  for (std::size_t j = 0; j < terms.size(); ++j)
    for (std::size_t k = j + 1; k < terms.size(); ++k)
      if (!terms[j].first.commutes_with(terms[k].first)) sum += std::abs(terms[j].second * terms[k].second);
  return T * (T / static_cast<double>(steps)) * sum;
}

/// (||d^2 H|| + ||dH||) / (eps delta^2) + ||dH||^2 / (eps delta^3).
inline double adiabatic_time(double norm_d1, double norm_d2, double gap_min, double eps) {
  if (!(gap_min > 0.0)) throw std::invalid_argument("adiabatic_time: gap must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("adiabatic_time: error budget must be positive");
  return (norm_d2 + norm_d1) / (eps * gap_min * gap_min) + norm_d1 * norm_d1 / (eps * gap_min * gap_min * gap_min);
}

/// N S^2 (T max_b)^2 / eps, without the hidden constant.
inline double depth_estimate(double n, double s, double T, double max_b, double eps_sim) {
  if (!(n > 0 && s > 0 && T > 0 && max_b > 0 && eps_sim > 0))
    throw std::invalid_argument("depth_estimate: inputs must be positive");
  return n * s * s * (T * max_b) * (T * max_b) / eps_sim;
}

/// H_v(g) = sum_k (Q^(k)(g) - q_k(g))^2 for one RG eigenstate, with q(g) from
/// continuation. Q^(k) = A_k + g B_k, so the square splits into g-independent
/// operators combined with the current q.
class RGParentFamily {
 public:
  RGParentFamily(RGModelSpec spec, std::uint64_t seed, ContinuationPolicy policy)
      : spec_(std::move(spec)), policy_(std::move(policy)), state_(seed_state(seed, spec_.size())) {
    const std::size_t n = spec_.size();
    for (std::size_t k = 1; k <= n; ++k) {
      PauliOperator a = build_rg_charge(k, spec_, 0.0);
      PauliOperator b = build_rg_charge(k, spec_, 1.0) - a;
      b.prune();
      a2_.push_back(square(a));
      ab_.push_back(anticommutator_half(a, b) * 2.0);
      b2_.push_back(square(b));
      a_.push_back(std::move(a));
      b_.push_back(std::move(b));
    }
  }

  const RGModelSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return state_.seed; }

  /// Charge eigenvalues of the tracked state at g; continuation moves forward
  /// from the last evaluated coupling, or restarts from the seed.
  const Eigen::VectorXd& q_at(double g) {
    if (g != state_.g) {
      const BetheState from = g > state_.g ? state_ : seed_state(state_.seed, spec_.size());
      state_ = continue_from(from, spec_, g, policy_).states.back();
    }
    return state_.q;
  }

  PauliOperator operator()(double g) {
    const Eigen::VectorXd q = q_at(g);
    const std::size_t n = spec_.size();
    PauliOperator h(n);
    double constant = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double qk = q(static_cast<Eigen::Index>(k));
      h += a2_[k];
      if (g != 0.0) {
        h += g * ab_[k];
        h += (g * g) * b2_[k];
        h -= (2.0 * qk * g) * b_[k];
      }
      h -= (2.0 * qk) * a_[k];
      constant += qk * qk;
    }
    h.add(PauliString::identity(n), constant);
    return h.prune();
  }

 private:
  RGModelSpec spec_;
  ContinuationPolicy policy_;
  BetheState state_;
  std::vector<PauliOperator> a_, b_, a2_, ab_, b2_;
};

/// Product state of a seed: q_k(0) = 1 means site k points up.
inline VectorC seed_product_state(std::uint64_t seed, std::size_t n) {
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;
  VectorC psi = VectorC::Zero(static_cast<Eigen::Index>(std::uint64_t{1} << n));
  psi(static_cast<Eigen::Index>(~seed & full)) = 1.0;
  return psi;
}

/// Unique ground state of a dense positive semidefinite parent Hamiltonian.
inline VectorC parent_ground_state(const PauliOperator& h, std::size_t dense_limit = kDefaultDenseLimit) {
  const auto es = to_dense(h, dense_limit).eigensystem();
  return es.eigenvectors().col(0);
}

inline CsvTable fidelity_csv(const std::vector<std::pair<double, EvolutionReport>>& runs) {
  CsvTable t({"T", "steps", "final_fidelity"});
  for (const auto& [T, r] : runs) t.row(T, static_cast<long long>(r.steps), r.final_fidelity);
  return t;
}

}  // namespace iprep
