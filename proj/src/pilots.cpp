#include "fddcs/pilots.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "fddcs/numerics.hpp"

namespace fddcs {

void validate_pilots(const PilotMatrix& p) {
  if (p.users() < 1 || p.symbols() < 1) throw std::invalid_argument("pilots: empty matrix");
  if (p.power.size() != p.users()) throw std::invalid_argument("pilots: power profile size");
  if ((p.power.array() <= 0.0).any()) throw std::invalid_argument("pilots: power must be > 0");
  for (Index k = 0; k < p.users(); ++k)
    if (std::abs(p.S.row(k).norm() - 1.0) > 1e-10)
      throw std::invalid_argument("pilots: row " + std::to_string(k) + " is not unit norm");
}

double pilot_coherence(const PilotMatrix& p) {
  if (p.users() < 2) return 0.0;
  return mutual_coherence(p.S.transpose());
}

namespace {

RVector power_profile(Index users, Index symbols, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("pilots: rho must be > 0");
  return RVector::Constant(users, rho * static_cast<double>(symbols));
}

void normalize_rows(CMatrix& s) {
  for (Index k = 0; k < s.rows(); ++k) {
    const double n = s.row(k).norm();
    if (n > 0.0) s.row(k) /= n;
  }
}

}  // namespace

PilotMatrix orthogonal_pilots(Index users, Index symbols, double rho) {
  if (users < 1) throw std::invalid_argument("orthogonal_pilots: need >= 1 user");
  if (symbols < users) throw std::invalid_argument("orthogonal_pilots: requires T >= K");
  // Rows of the unitary T-point DFT.
  CMatrix s(users, symbols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(symbols));
  for (Index k = 0; k < users; ++k)
    for (Index t = 0; t < symbols; ++t)
      s(k, t) = scale * std::polar(1.0, 2.0 * kPi * static_cast<double>(k * t) /
                                            static_cast<double>(symbols));
  return {s, power_profile(users, symbols, rho), "orthogonal"};
}

PilotMatrix random_pilots(Index users, Index symbols, Rng& rng, double rho) {
  if (users < 1 || symbols < 1) throw std::invalid_argument("random_pilots: empty shape");
  CMatrix s = complex_gaussian_matrix(users, symbols, rng);
  normalize_rows(s);
  return {s, power_profile(users, symbols, rho), "random"};
}

PilotMatrix design_low_coherence(Index users, Index symbols, const PilotDesignOptions& opts,
                                 Rng& rng, double rho) {
  if (!(symbols > 1 && symbols < users))
    throw std::invalid_argument("design_low_coherence: requires 1 < T < K");
  if (!(opts.gamma > 0.0 && opts.gamma < 1.0))
    throw std::invalid_argument("design_low_coherence: gamma must lie in (0, 1)");
  if (!(opts.shrink_percent > 0.0 && opts.shrink_percent < 100.0))
    throw std::invalid_argument("design_low_coherence: shrink percent must lie in (0, 100)");

  PilotMatrix best = random_pilots(users, symbols, rng, rho);
  best.kind = "designed";
  double best_mu = pilot_coherence(best);

  const Index k = users;
  const auto off_count = static_cast<std::size_t>(k * (k - 1));
  const auto shrink_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(opts.shrink_percent / 100.0 * static_cast<double>(off_count))));

  CMatrix st = best.S.transpose();  // T x K, columns are the user sequences
  int since_best = 0;
  std::vector<double> mags;
  mags.reserve(off_count);
  for (int it = 0; it < opts.iterations && since_best < opts.patience; ++it) {
    CMatrix g = st.adjoint() * st;
    mags.clear();
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < k; ++i)
        if (i != j) mags.push_back(std::abs(g(i, j)));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(shrink_count - 1),
                     mags.end(), std::greater<>());
    const double threshold = mags[shrink_count - 1];
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < k; ++i)
        if (i != j && std::abs(g(i, j)) >= threshold) g(i, j) *= opts.gamma;

    st = truncated_gram_factor(g, symbols);
    for (Index j = 0; j < k; ++j) {
      const double n = st.col(j).norm();
      if (n > 0.0) st.col(j) /= n;
    }
    const double mu = mutual_coherence(st);
    if (mu < best_mu) {
      best_mu = mu;
      best.S = st.transpose();
      since_best = 0;
    } else {
      ++since_best;
    }
  }
  normalize_rows(best.S);
  return best;
}

CMatrix kron_sensing_matrix(const CMatrix& s, const CMatrix& d) { return kron(s.transpose(), d); }

CMatrix kron_sensing_matrix(const PilotMatrix& pilots, const Dictionary& d) {
  return kron_sensing_matrix(pilots.S, d.matrix);
}

std::vector<Index> schedule_disjoint_users(const std::vector<std::vector<Index>>& supports,
                                           Index quota) {
  std::vector<Index> order(supports.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return supports[static_cast<std::size_t>(a)].size() < supports[static_cast<std::size_t>(b)].size();
  });
  std::vector<Index> chosen;
  std::set<Index> used;
  for (Index id : order) {
    if (static_cast<Index>(chosen.size()) >= quota) break;
    const auto& s = supports[static_cast<std::size_t>(id)];
    const bool clash = std::any_of(s.begin(), s.end(), [&](Index i) { return used.count(i) > 0; });
    if (clash) continue;
    chosen.push_back(id);
    used.insert(s.begin(), s.end());
  }
  return chosen;
}

DownlinkPilots downlink_pilots(Index td, Index n, double rho, Rng& rng) {
  if (td < 1 || n < 1) throw std::invalid_argument("downlink_pilots: empty shape");
  if (rho < 0.0) throw std::invalid_argument("downlink_pilots: rho must be >= 0");
  if (rho == 0.0) return {CMatrix::Zero(td, n), 0.0};
  return {complex_gaussian_matrix(td, n, rng, rho / static_cast<double>(n)), rho};
}

}  // namespace fddcs
