#pragma once

#include <cstdint>
#include <random>

#include "fddcs/types.hpp"

namespace fddcs {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent substreams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Generator for substream `index` of `master`. Same inputs, same stream.
inline Rng substream(std::uint64_t master, std::uint64_t index, std::uint64_t salt = 0) {
  return Rng(mix64(mix64(master ^ mix64(salt)) + index));
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline Complex complex_gaussian(Rng& rng, double variance = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline CMatrix complex_gaussian_matrix(Index rows, Index cols, Rng& rng, double variance = 1.0) {
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = complex_gaussian(rng, variance);
  return m;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace fddcs
