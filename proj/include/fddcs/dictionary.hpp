#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "fddcs/types.hpp"

namespace fddcs {

enum class DictionaryOrigin { dft, odft, learned, joint_learned };

std::string to_string(DictionaryOrigin origin);
DictionaryOrigin dictionary_origin_from_string(const std::string& s);

/// N x M sparsifying matrix. Columns satisfy ||d_j|| <= 1 (+1e-9).
struct Dictionary {
  CMatrix matrix;
  std::string label;
  DictionaryOrigin origin = DictionaryOrigin::dft;
  std::string link;  // "ul" / "dl" for jointly learned pairs, empty otherwise

  Index rows() const { return matrix.rows(); }
  Index atoms() const { return matrix.cols(); }
};

/// Throws std::invalid_argument naming the first offending column.
void validate_dictionary(const Dictionary& d);

/// Projects every column onto the unit ball (columns with norm > 1 rescaled).
void project_to_unit_ball(CMatrix& d);

/// Normalized square DFT, columns f(psi) for psi = -1/2 + k/N.
Dictionary dft_square(Index n);

/// Overcomplete DFT, columns f(psi) for psi = -1/2 + k/M.
Dictionary dft_overcomplete(Index n, Index m);

/// URA variant: F_h (n2 x m2) kron F_v (n1 x m1); vertical index runs fastest.
Dictionary dft_overcomplete_ura(Index n1, Index m1, Index n2, Index m2);

/// Square URA DFT, F_h (n2 x n2) kron F_v (n1 x n1).
Dictionary dft_square_ura(Index n1, Index n2);

/// Pair of overcomplete DFTs sharing one sin(theta) grid {-1, -1 + 2/M, ...}
/// for a ULA with physical spacing `spacing_m`, evaluated at the uplink and
/// downlink wavelengths. first = uplink, second = downlink.
std::pair<Dictionary, Dictionary> joint_odft(Index n, Index m, double spacing_m,
                                             double uplink_wavelength,
                                             double downlink_wavelength);

/// Largest normalized inner product between distinct columns.
template <typename Derived>
double mutual_coherence(const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() < 2) throw std::invalid_argument("mutual_coherence: need at least 2 columns");
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> n = x;
  for (Index j = 0; j < n.cols(); ++j) {
    const double c = n.col(j).norm();
    if (!(c > 0.0))
      throw std::invalid_argument("mutual_coherence: zero column " + std::to_string(j));
    n.col(j) /= c;
  }
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> g = n.adjoint() * n;
  double mu = 0.0;
  for (Index j = 0; j < g.cols(); ++j)
    for (Index i = 0; i < j; ++i) mu = std::max(mu, std::abs(g(i, j)));
  return std::min(mu, 1.0);
}

/// sqrt((K - T) / (T (K - 1))); requires 1 <= T < K.
double welch_bound(Index k, Index t);

}  // namespace fddcs
