#pragma once

#include <string>
#include <vector>

#include "fddcs/dictionary.hpp"
#include "fddcs/random.hpp"
#include "fddcs/types.hpp"

namespace fddcs {

/// Uplink pilots S (K x T, unit-norm rows) with per-user training power
/// rho_k * T; C = diag(sqrt(power)).
struct PilotMatrix {
  CMatrix S;
  RVector power;
  std::string kind;

  Index users() const { return S.rows(); }
  Index symbols() const { return S.cols(); }
  CMatrix C() const { return power.cwiseSqrt().cast<Complex>().asDiagonal(); }
};

void validate_pilots(const PilotMatrix& p);

/// mu{S^T}: coherence between user sequences; 0 for a single user.
double pilot_coherence(const PilotMatrix& p);

PilotMatrix orthogonal_pilots(Index users, Index symbols, double rho = 1.0);
PilotMatrix random_pilots(Index users, Index symbols, Rng& rng, double rho = 1.0);

struct PilotDesignOptions {
  double shrink_percent = 20.0;  // top t% of off-diagonal |G_ij| get shrunk
  double gamma = 0.9;
  int iterations = 200;
  int patience = 50;  // stop after this many iterations without a new best
};

/// Iterative Gram shrinkage starting from random Gaussian pilots. Returns the
/// iterate with the smallest coherence, never worse than the initialization.
PilotMatrix design_low_coherence(Index users, Index symbols, const PilotDesignOptions& opts,
                                 Rng& rng, double rho = 1.0);

/// E = S^T kron D, shape (N T) x (M K).
CMatrix kron_sensing_matrix(const PilotMatrix& pilots, const Dictionary& d);
CMatrix kron_sensing_matrix(const CMatrix& s, const CMatrix& d);

/// Greedy pick of up to `quota` users with pairwise-disjoint supports, smaller
/// supports first, ties by id. Returned ids are in selection order.
std::vector<Index> schedule_disjoint_users(const std::vector<std::vector<Index>>& supports,
                                           Index quota);

struct DownlinkPilots {
  CMatrix A;  // T_d x N
  double rho = 0.0;
};

/// Entries i.i.d. CN(0, rho / N), so E||A||_F^2 = rho T_d.
DownlinkPilots downlink_pilots(Index td, Index n, double rho, Rng& rng);

}  // namespace fddcs
