#include "fddcs/dictionary.hpp"

#include <cmath>
#include <sstream>

#include "fddcs/numerics.hpp"

namespace fddcs {

std::string to_string(DictionaryOrigin origin) {
  switch (origin) {
    case DictionaryOrigin::dft: return "dft";
    case DictionaryOrigin::odft: return "odft";
    case DictionaryOrigin::learned: return "learned";
    case DictionaryOrigin::joint_learned: return "joint_learned";
  }
  return "dft";
}

DictionaryOrigin dictionary_origin_from_string(const std::string& s) {
  if (s == "dft") return DictionaryOrigin::dft;
  if (s == "odft") return DictionaryOrigin::odft;
  if (s == "learned") return DictionaryOrigin::learned;
  if (s == "joint_learned") return DictionaryOrigin::joint_learned;
  throw std::invalid_argument("unknown dictionary origin '" + s + "'");
}

void validate_dictionary(const Dictionary& d) {
  if (d.rows() < 1 || d.atoms() < 1) throw std::invalid_argument("dictionary: empty matrix");
  if (!d.matrix.allFinite()) throw std::invalid_argument("dictionary: non-finite entries");
  for (Index j = 0; j < d.atoms(); ++j) {
    const double c = d.matrix.col(j).norm();
    if (c > 1.0 + 1e-9) {
      std::ostringstream os;
      os << "dictionary: column " << j << " has norm " << c << " > 1";
      throw std::invalid_argument(os.str());
    }
  }
  if (d.origin != DictionaryOrigin::dft && d.atoms() < d.rows())
    throw std::invalid_argument("dictionary: overcomplete origin requires M >= N");
}

void project_to_unit_ball(CMatrix& d) {
  for (Index j = 0; j < d.cols(); ++j) {
    const double c = d.col(j).norm();
    if (c > 1.0) d.col(j) /= c;
  }
}

namespace {

CMatrix dft_grid(Index n, Index m) {
  CMatrix f(n, m);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index k = 0; k < m; ++k) {
    const double psi = -0.5 + static_cast<double>(k) / static_cast<double>(m);
    for (Index i = 0; i < n; ++i)
      f(i, k) = scale * std::polar(1.0, 2.0 * kPi * psi * static_cast<double>(i));
  }
  return f;
}

}  // namespace

Dictionary dft_square(Index n) {
  if (n < 1) throw std::invalid_argument("dft_square: N must be >= 1");
  return {dft_grid(n, n), "dft", DictionaryOrigin::dft, {}};
}

Dictionary dft_overcomplete(Index n, Index m) {
  if (n < 1) throw std::invalid_argument("dft_overcomplete: N must be >= 1");
  if (m < n) throw std::invalid_argument("dft_overcomplete: M must be >= N");
  return {dft_grid(n, m), "odft", DictionaryOrigin::odft, {}};
}

Dictionary dft_overcomplete_ura(Index n1, Index m1, Index n2, Index m2) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("dft_overcomplete_ura: empty factor");
  if (m1 < n1 || m2 < n2)
    throw std::invalid_argument("dft_overcomplete_ura: each factor needs M >= N");
  return {kron(dft_grid(n2, m2), dft_grid(n1, m1)), "odft", DictionaryOrigin::odft, {}};
}

Dictionary dft_square_ura(Index n1, Index n2) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("dft_square_ura: empty factor");
  return {kron(dft_grid(n2, n2), dft_grid(n1, n1)), "dft", DictionaryOrigin::dft, {}};
}

std::pair<Dictionary, Dictionary> joint_odft(Index n, Index m, double spacing_m,
                                             double uplink_wavelength,
                                             double downlink_wavelength) {
  if (n < 1 || m < n) throw std::invalid_argument("joint_odft: need M >= N >= 1");
  if (!(spacing_m > 0.0) || !(uplink_wavelength > 0.0) || !(downlink_wavelength > 0.0))
    throw std::invalid_argument("joint_odft: spacing and wavelengths must be positive");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  CMatrix up(n, m), down(n, m);
  for (Index k = 0; k < m; ++k) {
    const double sin_theta = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(m);
    const double psi_u = spacing_m * sin_theta / uplink_wavelength;
    const double psi_d = spacing_m * sin_theta / downlink_wavelength;
    for (Index i = 0; i < n; ++i) {
      up(i, k) = scale * std::polar(1.0, 2.0 * kPi * psi_u * static_cast<double>(i));
      down(i, k) = scale * std::polar(1.0, 2.0 * kPi * psi_d * static_cast<double>(i));
    }
  }
  return {Dictionary{up, "jodft_ul", DictionaryOrigin::odft, "ul"},
          Dictionary{down, "jodft_dl", DictionaryOrigin::odft, "dl"}};
}

double welch_bound(Index k, Index t) {
  if (t < 1 || t >= k)
    throw std::invalid_argument("welch_bound: requires 1 <= T < K (use orthogonal pilots)");
  const double kk = static_cast<double>(k);
  const double tt = static_cast<double>(t);
  return std::sqrt(kk - tt) / std::sqrt(tt * (kk - 1.0));
}

}  // namespace fddcs
