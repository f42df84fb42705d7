#pragma once

// Model Hamiltonians and conserved charges as Pauli sums.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iprep/pauli.hpp"

namespace iprep {

enum class RGKind { central_spin, constant_spacing, random_uniform, custom };

inline std::string to_string(RGKind k) {
  switch (k) {
    case RGKind::central_spin: return "central_spin";
    case RGKind::constant_spacing: return "constant_spacing";
    case RGKind::random_uniform: return "random_uniform";
    case RGKind::custom: return "custom";
  }
  return "?";
}

inline RGKind rg_kind_from_string(const std::string& s) {
  if (s == "central_spin") return RGKind::central_spin;
  if (s == "constant_spacing") return RGKind::constant_spacing;
  if (s == "random_uniform") return RGKind::random_uniform;
  if (s == "custom") return RGKind::custom;
  throw std::invalid_argument("unknown RG model kind '" + s + "'");
}

/// Richardson-Gaudin parameters {eps_k}, {omega_k}. The coupling g is passed
/// separately wherever it is needed.
class RGModelSpec {
 public:
  RGModelSpec(std::vector<double> epsilons, std::vector<double> omegas,
              RGKind kind = RGKind::custom)
      : eps_(std::move(epsilons)), omega_(std::move(omegas)), kind_(kind) {
    if (eps_.size() < 2) throw std::invalid_argument("RGModelSpec: need at least 2 sites");
    if (eps_.size() > kMaxSites) throw std::invalid_argument("RGModelSpec: too many sites");
    if (omega_.size() != eps_.size())
      throw std::invalid_argument("RGModelSpec: epsilons and omegas differ in length");
    for (std::size_t i = 0; i < eps_.size(); ++i)
      for (std::size_t j = i + 1; j < eps_.size(); ++j)
        if (eps_[i] == eps_[j])
          throw std::invalid_argument("RGModelSpec: duplicated epsilon " +
                                      std::to_string(eps_[i]));
  }

  /// omega_1 = 1, eps_1 = 0; omega_i = 0, eps_i = -exp((i-2)/N) for i >= 2.
  static RGModelSpec central_spin(std::size_t n) {
    std::vector<double> eps(n, 0.0), om(n, 0.0);
    om[0] = 1.0;
    for (std::size_t i = 2; i <= n; ++i)
      eps[i - 1] = -std::exp(static_cast<double>(i - 2) / static_cast<double>(n));
    return RGModelSpec(std::move(eps), std::move(om), RGKind::central_spin);
  }

  /// eps_k = k - 1, omega_k = 1.
  static RGModelSpec constant_spacing(std::size_t n) {
    std::vector<double> eps(n), om(n, 1.0);
    for (std::size_t k = 0; k < n; ++k) eps[k] = static_cast<double>(k);
    return RGModelSpec(std::move(eps), std::move(om), RGKind::constant_spacing);
  }

  /// eps_k i.i.d. uniform on [0, 1], sorted ascending; near-duplicates
  /// (within 1e-9) are redrawn. omega_k = 1.
  static RGModelSpec random_uniform(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> eps;
    while (eps.size() < n) {
      double x = u(rng);
      bool dup = std::any_of(eps.begin(), eps.end(),
                             [&](double e) { return std::abs(e - x) < 1e-9; });
      if (!dup) eps.push_back(x);
    }
    std::sort(eps.begin(), eps.end());
    return RGModelSpec(std::move(eps), std::vector<double>(n, 1.0), RGKind::random_uniform);
  }

  std::size_t size() const { return eps_.size(); }
  std::span<const double> epsilons() const { return eps_; }
  std::span<const double> omegas() const { return omega_; }
  double epsilon(std::size_t k) const { return eps_.at(k); }
  RGKind kind() const { return kind_; }

  double min_spacing() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < eps_.size(); ++i)
      for (std::size_t j = i + 1; j < eps_.size(); ++j)
        m = std::min(m, std::abs(eps_[i] - eps_[j]));
    return m;
  }
  double max_spacing() const {
    auto [lo, hi] = std::minmax_element(eps_.begin(), eps_.end());
    return *hi - *lo;
  }

 private:
  std::vector<double> eps_;
  std::vector<double> omega_;
  RGKind kind_;
};

namespace detail {
inline PauliString two_site(std::size_t n, std::size_t a, std::size_t b, Pauli p) {
  PauliString s(n);
  s.set(a, p);
  s.set(b, p);
  return s;
}
}  // namespace detail

/// Periodic XXZ chain: -1/4 sum_i (X_i X_{i+1} + Y_i Y_{i+1} + Delta Z_i Z_{i+1}).
inline PauliOperator build_xxz(std::size_t n, double delta) {
  if (n < 2) throw std::invalid_argument("build_xxz: need N >= 2");
  PauliOperator h(n);
  // N = 2 has both bonds on the same pair; they accumulate.
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t j = i % n + 1;
    h.add(detail::two_site(n, i, j, Pauli::X), -0.25);
    h.add(detail::two_site(n, i, j, Pauli::Y), -0.25);
    h.add(detail::two_site(n, i, j, Pauli::Z), -0.25 * delta);
  }
  return h.prune();
}

/// Total magnetization sum_i Z_i.
inline PauliOperator build_magnetization(std::size_t n) {
  PauliOperator m(n);
  for (std::size_t i = 1; i <= n; ++i) m.add(PauliString::single(n, i, Pauli::Z), 1.0);
  return m;
}

/// Global parity prod_i Z_i.
inline PauliOperator build_parity(std::size_t n) {
  PauliString s(n);
  for (std::size_t i = 1; i <= n; ++i) s.set(i, Pauli::Z);
  return PauliOperator(s, 1.0);
}

/// Q^(k) = Z_k/2 + 1/2 + (g/4) sum_{j != k} (sigma_k . sigma_j - 1)/(eps_k - eps_j),
/// with k 1-based.
inline PauliOperator build_rg_charge(std::size_t k, const RGModelSpec& spec, double g) {
  const std::size_t n = spec.size();
  if (k < 1 || k > n) throw std::out_of_range("build_rg_charge: site index out of range");
  PauliOperator q(n);
  q.add(PauliString::single(n, k, Pauli::Z), 0.5);
  double constant = 0.5;
  if (g != 0.0) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (j == k) continue;
      const double w = 0.25 * g / (spec.epsilon(k - 1) - spec.epsilon(j - 1));
      for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) q.add(detail::two_site(n, k, j, p), w);
      constant -= w;
    }
  }
  q.add(PauliString::identity(n), constant);
  return q.prune();
}

inline std::vector<PauliOperator> build_rg_charges(const RGModelSpec& spec, double g) {
  std::vector<PauliOperator> out;
  out.reserve(spec.size());
  for (std::size_t k = 1; k <= spec.size(); ++k) out.push_back(build_rg_charge(k, spec, g));
  return out;
}

/// H^RG = sum_k omega_k Q^(k).
inline PauliOperator build_rg_hamiltonian(const RGModelSpec& spec, double g) {
  PauliOperator h(spec.size());
  for (std::size_t k = 1; k <= spec.size(); ++k)
    if (spec.omegas()[k - 1] != 0.0) h += spec.omegas()[k - 1] * build_rg_charge(k, spec, g);
  return h;
}

/// sum_k (Q_k - q_k)^2 recollected in the Pauli basis.
inline PauliOperator build_parent(std::span<const PauliOperator> charges,
                                  std::span<const double> targets) {
  if (charges.size() != targets.size())
    throw std::invalid_argument("build_parent: charges and targets differ in length");
  if (charges.empty()) throw std::invalid_argument("build_parent: no charges");
  const std::size_t n = charges.front().n_sites();
  PauliOperator h(n);
  for (std::size_t k = 0; k < charges.size(); ++k) {
    if (charges[k].n_sites() != n)
      throw std::invalid_argument("build_parent: charges act on different site counts");
    h += square(charges[k] - PauliOperator::identity(n, targets[k]));
  }
  return h;
}

}  // namespace iprep
