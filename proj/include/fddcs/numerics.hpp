#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "fddcs/types.hpp"

// Dense linear-algebra kernel shared by every other module. Everything here is
// templated on the Eigen expression type so that real and complex matrices go
// through the same code.

namespace fddcs {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct SVDResult {
  MatrixX<Scalar> U;
  Eigen::VectorXd singular_values;  // descending, non-negative
  MatrixX<Scalar> V;

  MatrixX<Scalar> reconstruct() const {
    return U * singular_values.asDiagonal() * V.adjoint();
  }
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

/// Thin SVD, X = U diag(s) V^H.
template <typename Derived>
SVDResult<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (!x.allFinite()) throw std::invalid_argument("svd: non-finite input");
  MatrixX<Scalar> m = x;
  Eigen::BDCSVD<MatrixX<Scalar>> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

/// Singular values below max(rows, cols) * sigma_max * 1e-12 count as zero.
inline double pinv_rank_tolerance(Index rows, Index cols, double sigma_max) {
  return static_cast<double>(std::max(rows, cols)) * sigma_max * 1e-12;
}

/// Moore-Penrose pseudo-inverse via SVD.
template <typename Derived>
MatrixX<typename Derived::Scalar> pseudo_inverse(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (!x.allFinite()) throw std::invalid_argument("pseudo_inverse: non-finite input");
  const auto dec = svd(x);
  const Eigen::VectorXd& s = dec.singular_values;
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double tol = pinv_rank_tolerance(x.rows(), x.cols(), smax);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tol && s(i) > 0.0) inv(i) = 1.0 / s(i);
  MatrixX<Scalar> out = dec.V * inv.asDiagonal() * dec.U.adjoint();
  return out;
}

/// Numerical rank under the pseudo-inverse tolerance.
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& x) {
  const auto dec = svd(x);
  const Eigen::VectorXd& s = dec.singular_values;
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double tol = pinv_rank_tolerance(x.rows(), x.cols(), s(0));
  return (s.array() > tol).count();
}

/// Minimum-norm least-squares solution X^+ Y.
template <typename DerivedX, typename DerivedY>
MatrixX<typename DerivedX::Scalar> least_squares(const Eigen::MatrixBase<DerivedX>& x,
                                                 const Eigen::MatrixBase<DerivedY>& y) {
  if (x.rows() != y.rows())
    throw std::invalid_argument("least_squares: row counts of X and Y differ");
  return pseudo_inverse(x) * y;
}

/// Best rank-`rank` factor S (rank x K) with S^H S closest to G in Frobenius
/// norm. G is symmetrized first and negative eigenvalues are clamped to zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> truncated_gram_factor(const Eigen::MatrixBase<Derived>& g,
                                                        Index rank) {
  using Scalar = typename Derived::Scalar;
  if (g.rows() != g.cols()) throw std::invalid_argument("truncated_gram_factor: G not square");
  if (rank < 1 || rank > g.rows())
    throw std::invalid_argument("truncated_gram_factor: rank out of range");
  if (!g.allFinite()) throw std::invalid_argument("truncated_gram_factor: non-finite input");
  const double asym = (g - g.adjoint()).norm();
  if (asym > 1e-10 * std::max(1.0, g.norm()))
    throw std::invalid_argument("truncated_gram_factor: G is not Hermitian");

  MatrixX<Scalar> h = (g + g.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(h);
  // Eigenvalues come back ascending; keep the top `rank`.
  const Index k = h.rows();
  MatrixX<Scalar> s(rank, k);
  for (Index r = 0; r < rank; ++r) {
    const Index col = k - 1 - r;
    const double lam = std::max(0.0, eig.eigenvalues()(col));
    s.row(r) = std::sqrt(lam) * eig.eigenvectors().col(col).adjoint();
  }
  return s;
}

/// Kronecker product A (x) B.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b) {
  MatrixX<typename DerivedA::Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Column-stacking vectorization.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> vec(const Eigen::MatrixBase<Derived>& x) {
  MatrixX<typename Derived::Scalar> m = x;
  return Eigen::Map<const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>>(m.data(),
                                                                                       m.size());
}

}  // namespace fddcs
