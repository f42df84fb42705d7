#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "iprep/pauli.hpp"

namespace iprep {

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;
using MatrixR = Eigen::MatrixXd;
using VectorR = Eigen::VectorXd;

inline constexpr std::size_t kDefaultDenseLimit = 14;

/// Dense Hermitian matrix on 2^n sites. Constructed only through to_dense or
/// from an explicit matrix that passes the Hermiticity check.
class DenseHermitian {
 public:
  DenseHermitian(MatrixC m, double herm_tol = 1e-12) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("DenseHermitian: not square");
    const auto d = static_cast<std::uint64_t>(m_.rows());
    if (d == 0 || (d & (d - 1)) != 0)
      throw std::invalid_argument("DenseHermitian: dimension is not a power of two");
    if (hermiticity_defect() >= herm_tol * std::max(1.0, m_.cwiseAbs().maxCoeff()))
      throw std::logic_error("DenseHermitian: matrix is not Hermitian");
  }

  Eigen::Index dim() const { return m_.rows(); }
  const MatrixC& matrix() const { return m_; }

  double hermiticity_defect() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

  VectorR eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<MatrixC> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }

  Eigen::SelfAdjointEigenSolver<MatrixC> eigensystem() const {
    return Eigen::SelfAdjointEigenSolver<MatrixC>(m_);
  }

 private:
  MatrixC m_;
};

inline MatrixC to_dense_matrix(const PauliOperator& op,
                               std::size_t dense_limit = kDefaultDenseLimit) {
  const std::size_t n = op.n_sites();
  if (n > dense_limit)
    throw std::length_error("to_dense: " + std::to_string(n) + " sites exceeds dense limit " +
                            std::to_string(dense_limit));
  const std::uint64_t dim = std::uint64_t{1} << n;
  MatrixC m = MatrixC::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (const auto& [s, c] : op.terms())
    for (std::uint64_t b = 0; b < dim; ++b) {
      auto [b2, ph] = s.act(b);
      m(static_cast<Eigen::Index>(b2), static_cast<Eigen::Index>(b)) += c * ph;
    }
  return m;
}

inline DenseHermitian to_dense(const PauliOperator& op,
                               std::size_t dense_limit = kDefaultDenseLimit) {
  return DenseHermitian(to_dense_matrix(op, dense_limit));
}

/// y = op * x without forming the matrix.
inline VectorC apply(const PauliOperator& op, const VectorC& x) {
  const std::uint64_t dim = std::uint64_t{1} << op.n_sites();
  if (static_cast<std::uint64_t>(x.size()) != dim)
    throw std::invalid_argument("apply: state dimension mismatch");
  VectorC y = VectorC::Zero(x.size());
  for (const auto& [s, c] : op.terms())
    for (std::uint64_t b = 0; b < dim; ++b) {
      auto [b2, ph] = s.act(b);
      y(static_cast<Eigen::Index>(b2)) += c * ph * x(static_cast<Eigen::Index>(b));
    }
  return y;
}

/// Spectral norm, via the largest eigenvalue of m^dagger m.
inline double operator_norm(const MatrixC& m) {
  Eigen::SelfAdjointEigenSolver<MatrixC> es(m.adjoint() * m, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace iprep
