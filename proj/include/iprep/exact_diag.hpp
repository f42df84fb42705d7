#pragma once

// Exact diagonalization: magnetization sectors of the XXZ chain, joint
// spectra of commuting charges, entanglement entropies and scaling fits.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "iprep/csv.hpp"
#include "iprep/dense.hpp"
#include "iprep/models.hpp"
#include "iprep/parallel.hpp"

namespace iprep {

inline std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// States with sum_i sigma^z_i = M. Each entry of states() is an up-spin mask
/// (bit N - i set when site i points up), so its popcount is (N + M) / 2; the
/// computational basis index is the complement.
class SectorBasis {
 public:
  SectorBasis(std::size_t n, int m) : n_(n), m_(m) {
    if (n < 1 || n > 30) throw std::invalid_argument("SectorBasis: N out of range");
    if (std::abs(m) > static_cast<int>(n) || (static_cast<int>(n) + m) % 2 != 0)
      throw std::invalid_argument("SectorBasis: infeasible magnetization " + std::to_string(m) +
                                  " for N = " + std::to_string(n));
    const auto ups = static_cast<std::size_t>((static_cast<int>(n) + m) / 2);
    states_.reserve(binomial(n, ups));
    if (ups == 0) {
      states_.push_back(0);
    } else {
      // Gosper's hack enumerates fixed-popcount masks in ascending order.
      std::uint64_t s = (std::uint64_t{1} << ups) - 1;
      const std::uint64_t limit = std::uint64_t{1} << n;
      while (s < limit) {
        states_.push_back(s);
        const std::uint64_t c = s & (~s + 1);
        const std::uint64_t r = s + c;
        s = (((r ^ s) >> 2) / c) | r;
      }
    }
  }

  std::size_t n_sites() const { return n_; }
  int magnetization() const { return m_; }
  std::size_t size() const { return states_.size(); }
  const std::vector<std::uint64_t>& states() const { return states_; }

  std::uint64_t basis_index(std::size_t i) const { return ~states_[i] & full_mask(); }

  /// Position of a computational basis index in the sector, or -1.
  long long find(std::uint64_t basis) const {
    const std::uint64_t up = ~basis & full_mask();
    auto it = std::lower_bound(states_.begin(), states_.end(), up);
    if (it == states_.end() || *it != up) return -1;
    return it - states_.begin();
  }

 private:
  std::uint64_t full_mask() const { return n_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_) - 1; }

  std::size_t n_;
  int m_;
  std::vector<std::uint64_t> states_;
};

/// Real sparse restriction of op to a sector. Throws if op leaks out of the
/// sector or has imaginary matrix elements.
inline Eigen::SparseMatrix<double> sector_matrix(const PauliOperator& op, const SectorBasis& basis) {
  if (op.n_sites() != basis.n_sites()) throw std::invalid_argument("sector_matrix: site count mismatch");
  std::vector<Eigen::Triplet<double>> trips;
  const std::size_t dim = basis.size();
  std::map<std::uint64_t, cplx> column;
  for (std::size_t col = 0; col < dim; ++col) {
    const std::uint64_t b = basis.basis_index(col);
    column.clear();
    for (const auto& [s, c] : op.terms()) {
      auto [b2, ph] = s.act(b);
      column[b2] += c * ph;
    }
    for (const auto& [b2, v] : column) {
      if (std::abs(v) < 1e-14) continue;
      if (std::abs(v.imag()) > 1e-14) throw std::logic_error("sector_matrix: complex matrix element");
      const long long row = basis.find(b2);
      if (row < 0) throw std::logic_error("sector_matrix: operator does not conserve the sector");
      trips.emplace_back(static_cast<int>(row), static_cast<int>(col), v.real());
    }
  }
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

struct LowestPair {
  double e0 = 0.0;
  double e1 = 0.0;
  int iterations = 0;
};

/// Two lowest distinct eigenvalues by Lanczos with full reorthogonalization.
/// A degenerate lowest level is seen as one Ritz value.
inline LowestPair lanczos_lowest(const Eigen::SparseMatrix<double>& a, std::uint64_t seed = 12345,
                                 int max_iter = 400, double tol = 1e-12) {
  const Eigen::Index dim = a.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  v.normalize();
  const int m_max = static_cast<int>(std::min<Eigen::Index>(dim, max_iter));
  Eigen::MatrixXd basis(dim, m_max);
  std::vector<double> alpha, beta;
  double prev0 = 0.0, prev1 = 0.0;
  LowestPair out;
  for (int j = 0; j < m_max; ++j) {
    basis.col(j) = v;
    Eigen::VectorXd w = a * v;
    const double al = v.dot(w);
    alpha.push_back(al);
    for (int pass = 0; pass < 2; ++pass)
      w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
    const double be = w.norm();
    const int k = j + 1;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    out.e0 = ev(0);
    out.e1 = k > 1 ? ev(1) : ev(0);
    out.iterations = k;
    if (k > 4 && std::abs(out.e0 - prev0) < tol && std::abs(out.e1 - prev1) < tol) break;
    prev0 = out.e0;
    prev1 = out.e1;
    if (be < 1e-12) break;  // invariant subspace exhausted
    beta.push_back(be);
    v = w / be;
  }
  return out;
}

struct GapRecord {
  std::size_t n = 0;
  int m = 0;
  double delta = 0.0;
  double e0 = 0.0;
  double gap = 0.0;
  bool degenerate = false;
  bool lanczos = false;
};

inline constexpr std::size_t kSectorDenseLimit = 20000;
inline constexpr std::size_t kLanczosThreshold = 1500;

/// Two lowest levels of H^XXZ in the sector; dense below kLanczosThreshold.
inline GapRecord xxz_sector_gap(std::size_t n, int m, double delta,
                                std::size_t sector_limit = kSectorDenseLimit) {
  const SectorBasis basis(n, m);
  if (basis.size() > sector_limit)
    throw std::length_error("xxz_sector_gap: sector dimension " + std::to_string(basis.size()) +
                            " exceeds limit");
  if (basis.size() < 2) throw std::invalid_argument("xxz_sector_gap: sector has a single state");
  const Eigen::SparseMatrix<double> h = sector_matrix(build_xxz(n, delta), basis);
  GapRecord r{n, m, delta, 0.0, 0.0, false, false};
  if (basis.size() <= kLanczosThreshold) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(h), Eigen::EigenvaluesOnly);
    r.e0 = es.eigenvalues()(0);
    r.gap = es.eigenvalues()(1) - r.e0;
  } else {
    const LowestPair lp = lanczos_lowest(h);
    r.e0 = lp.e0;
    r.gap = lp.e1 - lp.e0;
    r.lanczos = true;
  }
  r.degenerate = r.gap < 1e-12;
  return r;
}

struct JointSpectrum {
  std::vector<Eigen::VectorXd> q;  // one charge-eigenvalue vector per eigenstate
  Eigen::MatrixXd vectors;         // columns are the common eigenvectors
  double leakage = 0.0;
  int retries = 0;
};

inline constexpr std::size_t kJointDenseLimit = 10;

inline Eigen::MatrixXd real_dense(const PauliOperator& op, std::size_t limit) {
  const MatrixC m = to_dense_matrix(op, limit);
  if (m.imag().cwiseAbs().maxCoeff() > 1e-14) throw std::logic_error("real_dense: operator is not real");
  return m.real();
}

/// Simultaneous eigenbasis of all RG charges at coupling g from a random
/// probe combination, retried with fresh coefficients if leakage exceeds 1e-9.
inline JointSpectrum joint_charge_spectrum(const RGModelSpec& spec, double g, std::uint64_t seed = 1,
                                           std::size_t dense_limit = kJointDenseLimit) {
  const std::size_t n = spec.size();
  if (n > dense_limit) throw std::length_error("joint_charge_spectrum: N exceeds dense limit");
  std::vector<Eigen::MatrixXd> qs;
  for (const auto& c : build_rg_charges(spec, g)) qs.push_back(real_dense(c, dense_limit));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  const Eigen::Index dim = qs.front().rows();
  for (int attempt = 0; attempt <= 5; ++attempt) {
    Eigen::MatrixXd probe = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& q : qs) probe += u(rng) * q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(probe);
    const Eigen::MatrixXd& v = es.eigenvectors();
    JointSpectrum out;
    out.vectors = v;
    out.retries = attempt;
    out.q.assign(static_cast<std::size_t>(dim), Eigen::VectorXd(static_cast<Eigen::Index>(n)));
    for (std::size_t k = 0; k < n; ++k) {
      const Eigen::MatrixXd d = v.transpose() * qs[k] * v;
      for (Eigen::Index s = 0; s < dim; ++s) out.q[static_cast<std::size_t>(s)](static_cast<Eigen::Index>(k)) = d(s, s);
      Eigen::MatrixXd off = d;
      off.diagonal().setZero();
      out.leakage = std::max(out.leakage, off.cwiseAbs().maxCoeff());
    }
    if (out.leakage < 1e-9) return out;
  }
  throw std::runtime_error("joint_charge_spectrum: probe combination degenerate after 5 retries");
}

/// Von Neumann entropy (natural log) of the reduced state on `sites` (1-based).
inline double entanglement_entropy(const VectorC& psi, std::size_t n, const std::vector<std::size_t>& sites) {
  if (static_cast<std::uint64_t>(psi.size()) != (std::uint64_t{1} << n))
    throw std::invalid_argument("entanglement_entropy: state dimension mismatch");
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw std::invalid_argument("entanglement_entropy: state not normalized");
  std::vector<bool> in_a(n + 1, false);
  for (std::size_t s : sites) {
    if (s < 1 || s > n) throw std::out_of_range("entanglement_entropy: site out of range");
    in_a[s] = true;
  }
  std::vector<std::size_t> a_sites, b_sites;
  for (std::size_t i = 1; i <= n; ++i) (in_a[i] ? a_sites : b_sites).push_back(i);
  const Eigen::Index da = Eigen::Index{1} << a_sites.size();
  const Eigen::Index db = Eigen::Index{1} << b_sites.size();
  MatrixC m = MatrixC::Zero(da, db);
  for (std::uint64_t idx = 0; idx < static_cast<std::uint64_t>(psi.size()); ++idx) {
    std::uint64_t ia = 0, ib = 0;
    for (std::size_t s : a_sites) ia = (ia << 1) | ((idx >> (n - s)) & 1u);
    for (std::size_t s : b_sites) ib = (ib << 1) | ((idx >> (n - s)) & 1u);
    m(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib)) = psi(static_cast<Eigen::Index>(idx));
  }
  Eigen::SelfAdjointEigenSolver<MatrixC> es(m * m.adjoint(), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    if (l > 1e-14) s -= l * std::log(l);
  }
  return s;
}

struct SlopeFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  double intercept = 0.0;
};

/// Least-squares slope of log y against log x.
inline SlopeFit loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("loglog_slope: length mismatch");
  if (xs.size() < 3) throw std::invalid_argument("loglog_slope: need at least 3 points");
  const std::size_t k = xs.size();
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw std::invalid_argument("loglog_slope: nonpositive data");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("loglog_slope: all x identical");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = ly[i] - f.intercept - f.slope * lx[i];
    ssr += r * r;
  }
  f.stderr_ = std::sqrt(ssr / static_cast<double>(k - 2) / sxx);
  return f;
}

inline CsvTable gap_records_csv(const std::vector<GapRecord>& recs) {
  CsvTable t({"N", "M", "delta", "gap"});
  for (const auto& r : recs) t.row(static_cast<long long>(r.n), r.m, r.delta, r.gap);
  return t;
}

inline CsvTable entropy_csv(std::size_t n, const std::vector<double>& entropies) {
  CsvTable t({"N", "state_index", "entropy"});
  for (std::size_t i = 0; i < entropies.size(); ++i)
    t.row(static_cast<long long>(n), static_cast<long long>(i), entropies[i]);
  return t;
}

}  // namespace iprep
