#pragma once

// Transverse-field XY chain: momenta, dispersion, Bogoliubov phases, mode
// occupations as Pauli sums, parent Hamiltonians and their bounds.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "iprep/csv.hpp"
#include "iprep/dense.hpp"
#include "iprep/models.hpp"
#include "iprep/pauli.hpp"

namespace iprep {

inline constexpr double kBoundaryTol = 1e-12;

struct XYPoint {
  double gamma = 1.0;
  double h = 0.0;

  XYPoint() = default;
  XYPoint(double g, double field) : gamma(g), h(field) {
    if (!(gamma >= 0.0) || !(h >= 0.0))
      throw std::invalid_argument("XYPoint: gamma and h must be nonnegative");
  }

  bool on_phase_boundary(double tol = kBoundaryTol) const {
    return std::abs(h - 1.0) < tol || (h < 1.0 && gamma < tol);
  }
};

struct MomentumSet {
  int parity = 1;               // +1: l half-integer, -1: l integer
  std::vector<double> l;        // the l labels
  std::vector<double> momenta;  // p = 2 pi l / N
};

inline MomentumSet momenta(std::size_t n, int parity) {
  if (n < 2) throw std::invalid_argument("momenta: need N >= 2");
  if (parity != 1 && parity != -1) throw std::invalid_argument("momenta: parity must be +1 or -1");
  MomentumSet m;
  m.parity = parity;
  const double shift = parity == 1 ? 0.5 : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = static_cast<double>(i) + shift;
    m.l.push_back(l);
    m.momenta.push_back(2.0 * std::numbers::pi * l / static_cast<double>(n));
  }
  return m;
}

inline double dispersion(double p, const XYPoint& pt) {
  const double a = std::cos(p) - pt.h;
  const double b = pt.gamma * std::sin(p);
  return std::sqrt(a * a + b * b);
}

/// e^{2 i theta_p} = (h - cos p + i gamma sin p) / eps(p).
inline cplx bogoliubov_phase(double p, const XYPoint& pt) {
  const double a = pt.h - std::cos(p);
  const double b = pt.gamma * std::sin(p);
  const double e = std::hypot(a, b);
  if (e < 1e-14) throw std::domain_error("bogoliubov_phase: h - cos p and gamma sin p both vanish");
  return {a / e, b / e};
}

/// -1/2 sum_j [ (1+gamma)/2 X_j X_{j+1} + (1-gamma)/2 Y_j Y_{j+1} + h Z_j ], periodic.
inline PauliOperator build_xy_hamiltonian(std::size_t n, const XYPoint& pt) {
  if (n < 2) throw std::invalid_argument("build_xy_hamiltonian: need N >= 2");
  PauliOperator hm(n);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t k = j % n + 1;
    hm.add(detail::two_site(n, j, k, Pauli::X), -0.25 * (1.0 + pt.gamma));
    hm.add(detail::two_site(n, j, k, Pauli::Y), -0.25 * (1.0 - pt.gamma));
    hm.add(PauliString::single(n, j, Pauli::Z), -0.5 * pt.h);
  }
  return hm.prune();
}

namespace detail {

/// Z_1 ... Z_{j-1} sigma^a_j with a in {X, Y}.
inline PauliString jw_string(std::size_t n, std::size_t j, Pauli a) {
  PauliString s(n);
  for (std::size_t k = 1; k < j; ++k) s.set(k, Pauli::Z);
  s.set(j, a);
  return s;
}

inline std::size_t momentum_index(double p, std::size_t n, int parity) {
  const MomentumSet ms = momenta(n, parity);
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(std::remainder(p - ms.momenta[i], 2.0 * std::numbers::pi)) < 1e-10) return i;
  throw std::invalid_argument("momentum " + std::to_string(p) + " is not in the parity " +
                              std::to_string(parity) + " momentum set");
}

/// sum over momenta with weights w_p of the mode occupation, as one Pauli sum.
inline PauliOperator weighted_occupations(std::size_t n, const std::vector<double>& ps,
                                          const std::vector<double>& weights, const XYPoint& pt) {
  static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const cplx I{0.0, 1.0};
  ComplexPauliSum acc(n);
  std::vector<PauliString> maj[2];
  for (std::size_t j = 1; j <= n; ++j) {
    maj[0].push_back(jw_string(n, j, Pauli::X));
    maj[1].push_back(jw_string(n, j, Pauli::Y));
  }
  const double nn = static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t l = 0; l < n; ++l) {
      cplx m[2][2] = {};
      for (std::size_t i = 0; i < ps.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double p = ps[i];
        const cplx ph = bogoliubov_phase(p, pt);
        const cplx f = weights[i] * std::exp(-I * p * (static_cast<double>(l) - static_cast<double>(j))) / nn;
        m[0][0] += f;
        m[0][1] += f * I * ph;
        m[1][0] += f * (-I) * std::conj(ph);
        m[1][1] += f;
      }
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          if (m[a][b] == cplx{}) continue;
          auto [s, e] = multiply(maj[a][j], maj[b][l]);
          acc.add(s, 0.25 * m[a][b] * ipow[e]);
        }
    }
  return acc.hermitian();
}

}  // namespace detail

/// Mode occupation c_p^dagger c_p written in Pauli strings. The bilinear
/// Majorana form is normalized so that its eigenvalues on the matching
/// parity block are 0 and 1.
inline PauliOperator number_operator(double p, std::size_t n, int parity, const XYPoint& pt) {
  detail::momentum_index(p, n, parity);
  return detail::weighted_occupations(n, {p}, {1.0}, pt);
}

inline PauliOperator parity_projector(std::size_t n, int parity) {
  PauliOperator pr = build_parity(n) * (0.5 * parity);
  pr.add(PauliString::identity(n), 0.5);
  return pr;
}

/// Required popcount parity (0 even, 1 odd) of the occupation pattern in a
/// parity sector. The fermion number is even for Z = +1 and odd for Z = -1;
/// modes with sin p = 0 and h < cos p are particle-hole flipped by the
/// Bogoliubov phase branch (p = 0 for h < 1), each flipping the parity.
inline int occupation_parity(std::size_t n, int parity, const XYPoint& pt) {
  int flips = 0;
  for (double p : momenta(n, parity).momenta)
    if (std::abs(std::sin(p)) < 1e-12 && pt.h < std::cos(p)) ++flips;
  return ((parity == 1 ? 0 : 1) + flips) % 2;
}

struct OccupationPattern {
  std::vector<int> even;  // over momenta(N, +1)
  std::vector<int> odd;   // over momenta(N, -1)
  int z = 1;              // parity of the target state

  const std::vector<int>& sector(int parity) const { return parity == 1 ? even : odd; }

  void validate(std::size_t n, const XYPoint& pt) const {
    if (even.size() != n || odd.size() != n)
      throw std::invalid_argument("OccupationPattern: pattern length differs from N");
    if (z != 1 && z != -1) throw std::invalid_argument("OccupationPattern: parity must be +1 or -1");
    for (int parity : {1, -1}) {
      int c = 0;
      for (int x : sector(parity)) {
        if (x != 0 && x != 1) throw std::invalid_argument("OccupationPattern: entries must be 0 or 1");
        c += x;
      }
      if (c % 2 != occupation_parity(n, parity, pt))
        throw std::invalid_argument("OccupationPattern: popcount parity does not match sector " +
                                    std::to_string(parity));
    }
  }

  template <typename Rng>
  static OccupationPattern random(std::size_t n, const XYPoint& pt, Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    OccupationPattern pat;
    auto draw = [&](int want) {
      std::vector<int> v(n);
      int c = 0;
      for (auto& x : v) c += (x = coin(rng) ? 1 : 0);
      if (c % 2 != want) v[n - 1] ^= 1;
      return v;
    };
    pat.even = draw(occupation_parity(n, 1, pt));
    pat.odd = draw(occupation_parity(n, -1, pt));
    pat.z = coin(rng) ? 1 : -1;
    return pat;
  }
};

/// (Z - z_v)^2 / 4 + sum_Z sum_{p in Gamma_Z} P_Z (c_p^dagger c_p - q_p)^2.
/// P_Z projects on parity Z; the first term costs one unit outside the target
/// parity sector, so the spectrum is integer with unit gap.
inline PauliOperator xy_parent(const OccupationPattern& pat, std::size_t n, const XYPoint& pt) {
  pat.validate(n, pt);
  std::vector<PauliOperator> charges;
  std::vector<double> targets;
  for (int parity : {1, -1}) {
    const MomentumSet ms = momenta(n, parity);
    const PauliOperator proj = parity_projector(n, parity);
    for (std::size_t i = 0; i < n; ++i) {
      PauliOperator c = number_operator(ms.momenta[i], n, parity, pt);
      c -= PauliOperator::identity(n, pat.sector(parity)[i]);
      charges.push_back(product(proj, c).hermitian());
      targets.push_back(0.0);
    }
  }
  charges.push_back(build_parity(n) * 0.5);
  targets.push_back(0.5 * pat.z);
  return build_parent(charges, targets);
}

struct SpectrumSummary {
  VectorR eigenvalues;
  double ground_energy = 0.0;
  int ground_degeneracy = 0;
  double gap = 0.0;
  double max_integer_deviation = 0.0;
};

inline SpectrumSummary summarize_spectrum(VectorR ev, double degeneracy_tol = 1e-9) {
  SpectrumSummary s;
  std::sort(ev.data(), ev.data() + ev.size());
  s.eigenvalues = ev;
  s.ground_energy = ev(0);
  s.ground_degeneracy = 0;
  s.gap = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) - ev(0) < degeneracy_tol) {
      ++s.ground_degeneracy;
    } else {
      s.gap = ev(i) - ev(0);
      break;
    }
  }
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    s.max_integer_deviation = std::max(s.max_integer_deviation, std::abs(ev(i) - std::round(ev(i))));
  return s;
}

inline SpectrumSummary xy_parent_spectrum(const OccupationPattern& pat, std::size_t n,
                                          const XYPoint& pt,
                                          std::size_t dense_limit = kDefaultDenseLimit) {
  return summarize_spectrum(to_dense(xy_parent(pat, n, pt), dense_limit).eigenvalues());
}

/// Closed-form min over p of eps(p)^2, four branches.
inline double min_dispersion_sq(const XYPoint& pt) {
  const double g = std::abs(pt.gamma), h = pt.h;
  if ((g < 1.0 && g * g + h > 1.0) || (h > 0.0 && g >= 1.0)) return (h - 1.0) * (h - 1.0);
  if ((h < 0.0 && g == 1.0) || (g < 1.0 && h + 1.0 <= g * g) || (g > 1.0 && h <= 0.0))
    return (h + 1.0) * (h + 1.0);
  if (h == 0.0 && g <= 1.0) return g * g;
  return g * g * (g * g + h * h - 1.0) / (g * g - 1.0);
}

struct LiomMatrices {
  MatrixR a_plus, a_minus;
  MatrixR gram_plus, gram_minus;
};

/// A^+_{n,l} = cos((n+1) p_l) eps(p_l) with p_l = 2 pi (l + 1/2) / N, A^- with
/// p_l = 2 pi l / N; n, l = 0..N-1.
inline LiomMatrices liom_matrices(std::size_t n, const XYPoint& pt) {
  if (n < 2) throw std::invalid_argument("liom_matrices: need N >= 2");
  LiomMatrices out;
  auto build = [&](int parity) {
    const MomentumSet ms = momenta(n, parity);
    const auto nn = static_cast<Eigen::Index>(n);
    MatrixR a(nn, nn);
    for (Eigen::Index r = 0; r < nn; ++r)
      for (Eigen::Index l = 0; l < nn; ++l) {
        const double p = ms.momenta[static_cast<std::size_t>(l)];
        a(r, l) = std::cos(static_cast<double>(r + 1) * p) * dispersion(p, pt);
      }
    return a;
  };
  out.a_plus = build(1);
  out.a_minus = build(-1);
  out.gram_plus = out.a_plus.transpose() * out.a_plus;
  out.gram_minus = out.a_minus.transpose() * out.a_minus;
  return out;
}

/// Q_loc^(k,Z) = sum_{p in Gamma_Z} cos(p k) eps(p) c_p^dagger c_p.
inline PauliOperator liom_charge(std::size_t k, std::size_t n, int parity, const XYPoint& pt) {
  const MomentumSet ms = momenta(n, parity);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = std::cos(ms.momenta[i] * static_cast<double>(k)) * dispersion(ms.momenta[i], pt);
  return detail::weighted_occupations(n, ms.momenta, w, pt);
}

inline double liom_target(std::size_t k, std::size_t n, int parity, const std::vector<int>& occ,
                          const XYPoint& pt) {
  const MomentumSet ms = momenta(n, parity);
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (occ[i]) q += std::cos(ms.momenta[i] * static_cast<double>(k)) * dispersion(ms.momenta[i], pt);
  return q;
}

/// sum_Z sum_{k=1..N} P_Z (Q_loc^(k,Z) - q_k)^2 plus a penalty N max_p eps(p)^2
/// on the wrong parity sector, on the scale of the charges.
inline PauliOperator liom_parent(const OccupationPattern& pat, std::size_t n, const XYPoint& pt) {
  pat.validate(n, pt);
  std::vector<PauliOperator> charges;
  std::vector<double> targets;
  double max_eps_sq = 0.0;
  for (int parity : {1, -1}) {
    const PauliOperator proj = parity_projector(n, parity);
    for (double p : momenta(n, parity).momenta) max_eps_sq = std::max(max_eps_sq, std::pow(dispersion(p, pt), 2));
    for (std::size_t k = 1; k <= n; ++k) {
      PauliOperator c = liom_charge(k, n, parity, pt);
      c -= PauliOperator::identity(n, liom_target(k, n, parity, pat.sector(parity), pt));
      charges.push_back(product(proj, c).hermitian());
      targets.push_back(0.0);
    }
  }
  const double w = std::sqrt(static_cast<double>(n) * max_eps_sq);
  charges.push_back(build_parity(n) * (0.5 * w));
  targets.push_back(0.5 * w * pat.z);
  return build_parent(charges, targets);
}

struct LiomGapBound {
  double grid = 0.0;       // N min over both momentum grids of eps^2
  double continuum = 0.0;  // N min_p eps^2, never above grid
};

/// Two distinct patterns of one parity sector differ in at least two modes,
/// and sigma_min^2(A) = (N/2) min eps^2 if the Gram matrices are diagonal.
inline LiomGapBound liom_gap_bound(std::size_t n, const XYPoint& pt) {
  if (pt.on_phase_boundary()) throw std::domain_error("liom_gap_bound: point on a phase boundary");
  double m = std::numeric_limits<double>::infinity();
  for (int parity : {1, -1})
    for (double p : momenta(n, parity).momenta) m = std::min(m, std::pow(dispersion(p, pt), 2));
  const double nn = static_cast<double>(n);
  return {nn * m, nn * min_dispersion_sq(pt)};
}

enum class PathParameter { gamma, h };

struct PhaseDerivative {
  cplx plus;   // derivative of e^{2 i theta_p}
  cplx minus;  // derivative of e^{-2 i theta_p}
};

/// Closed-form first and second derivatives of e^{+-2 i theta_p} in gamma or h.
inline PhaseDerivative path_derivatives(double p, const XYPoint& pt, PathParameter which, int order) {
  if (pt.on_phase_boundary()) throw std::domain_error("path_derivatives: point on a phase boundary");
  if (order != 1 && order != 2) throw std::invalid_argument("path_derivatives: order must be 1 or 2");
  const cplx I{0.0, 1.0};
  const double s = std::sin(p), c = std::cos(p), g = pt.gamma, h = pt.h;
  const double e = dispersion(p, pt);
  if (e < 1e-14) throw std::domain_error("path_derivatives: vanishing dispersion");
  if (which == PathParameter::gamma) {
    if (order == 1)
      return {I * s * (h - c) / ((h - I * g * s - c) * e), I * s * (c - h) / ((h + I * g * s - c) * e)};
    return {s * s * (c - h) * (h + 2.0 * I * g * s - c) /
                ((h + I * g * s - c) * std::pow(-h + I * g * s + c, 2) * e),
            s * s * (c - h) * (h - 2.0 * I * g * s - c) /
                ((h - I * g * s - c) * std::pow(h + I * g * s - c, 2) * e)};
  }
  if (order == 1)
    return {g * s / ((g * s + I * (h - c)) * e), g * s / ((-I * h + g * s + I * c) * e)};
  return {-I * g * s * (-2.0 * h - I * g * s + 2.0 * c) /
              ((h + I * g * s - c) * std::pow(-h + I * g * s + c, 2) * e),
          I * g * s * (-2.0 * h + I * g * s + 2.0 * c) /
              ((h - I * g * s - c) * std::pow(h + I * g * s - c, 2) * e)};
}

/// Number of sites in the shortest cyclic arc covering the support of s.
inline std::size_t cyclic_span(const PauliString& s) {
  const std::size_t n = s.n_sites();
  std::vector<bool> on(n);
  std::size_t count = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (s.at(i) != Pauli::I) on[i - 1] = true, ++count;
  if (count == 0) return 0;
  std::size_t longest_gap = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (on[start]) continue;
    std::size_t len = 0;
    while (len < n && !on[(start + len) % n]) ++len;
    longest_gap = std::max(longest_gap, len);
  }
  return n - longest_gap;
}

/// Sites covered by a Jordan-Wigner string on the ring. The wrap-around
/// string differs from its local form by the global parity, so both are tried.
inline std::size_t ring_locality(const PauliString& s) {
  PauliString par(s.n_sites());
  for (std::size_t i = 1; i <= s.n_sites(); ++i) par.set(i, Pauli::Z);
  return std::min(cyclic_span(s), cyclic_span(multiply(s, par).first));
}

/// Distance |j - l| between the outermost sites, the range used when a
/// charge with terms at |j - l| <= k + 1 is called (k+1)-local.
inline std::size_t ring_range(const PauliString& s) {
  const std::size_t span = ring_locality(s);
  return span == 0 ? 0 : span - 1;
}

inline std::size_t max_ring_locality(const PauliOperator& op) {
  std::size_t m = 0;
  for (const auto& [s, c] : op.terms()) m = std::max(m, ring_locality(s));
  return m;
}

inline std::size_t max_ring_range(const PauliOperator& op) {
  std::size_t m = 0;
  for (const auto& [s, c] : op.terms()) m = std::max(m, ring_range(s));
  return m;
}

inline CsvTable dispersion_csv(std::size_t n, const XYPoint& pt) {
  CsvTable t({"parity", "p", "epsilon"});
  for (int parity : {1, -1})
    for (double p : momenta(n, parity).momenta) t.row(parity, p, dispersion(p, pt));
  return t;
}

inline CsvTable gram_diagonal_csv(std::size_t n, const XYPoint& pt) {
  const LiomMatrices lm = liom_matrices(n, pt);
  CsvTable t({"parity", "index", "gram_diagonal", "half_n_eps_sq", "max_offdiag_in_row"});
  for (int parity : {1, -1}) {
    const MatrixR& g = parity == 1 ? lm.gram_plus : lm.gram_minus;
    const MomentumSet ms = momenta(n, parity);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      double off = 0.0;
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        if (j != i) off = std::max(off, std::abs(g(i, j)));
      const double e = dispersion(ms.momenta[static_cast<std::size_t>(i)], pt);
      t.row(parity, static_cast<long long>(i), g(i, i), 0.5 * static_cast<double>(n) * e * e, off);
    }
  }
  return t;
}

inline CsvTable gap_bound_sweep_csv(std::size_t n, const std::vector<double>& gammas,
                                    const std::vector<double>& hs) {
  CsvTable t({"gamma", "h", "value"});
  for (double g : gammas)
    for (double h : hs) {
      const XYPoint pt(g, h);
      if (pt.on_phase_boundary()) continue;
      t.row(g, h, liom_gap_bound(n, pt).grid);
    }
  return t;
}

}  // namespace iprep
