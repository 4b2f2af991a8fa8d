#pragma once

#include <optional>
#include <vector>

#include "fddcs/dictionary.hpp"
#include "fddcs/pilots.hpp"
#include "fddcs/random.hpp"
#include "fddcs/solvers.hpp"
#include "fddcs/types.hpp"

// Channel estimators. Noise is unit-variance circular Gaussian throughout, so
// pilot powers double as per-symbol SNRs. Where SolverOptions::epsilon is 0
// the residual bound is derived from the noise statistics (noise_epsilon).

namespace fddcs {

/// Y_u = H C S + W for the K users sharing the pilots.
struct UplinkObservation {
  CMatrix y;  // N x T_u
  PilotMatrix pilots;
  double noise_variance = 1.0;
};

struct DownlinkObservation {
  CMatrix y;  // T_d x N_R
  DownlinkPilots pilots;
  double noise_variance = 1.0;
};

/// `channels` is N x K, one column per user. With `noiseless` the noise draw
/// is skipped and noise_variance is 0.
UplinkObservation simulate_uplink(const CMatrix& channels, const PilotMatrix& pilots, Rng& rng,
                                  bool noiseless = false);

/// y = A h + w with h of shape N x N_R.
DownlinkObservation simulate_downlink(const CMatrix& h, const DownlinkPilots& pilots, Rng& rng,
                                      bool noiseless = false);

struct EstimateReport {
  CMatrix estimate;  // N x K (uplink, one column per user) or N x N_R (downlink)
  std::vector<std::vector<Index>> supports;  // per column, dictionary atom indices
  SparseCode code;  // diagnostics of the last solve; empty for LS
  bool underdetermined = false;
  bool converged = true;
};

/// H = Y (C S)^+. Flagged underdetermined when T_u < K.
EstimateReport uplink_ls(const UplinkObservation& obs);

/// Sparse recovery on vec(Y) = (S^T kron D) vec(B C) + w; columns of B C are
/// rescaled by 1 / sqrt(rho_k T_u) and mapped through D.
EstimateReport uplink_sr(const UplinkObservation& obs, const Dictionary& d,
                         const SolverOptions& opts = {});

/// Sparse recovery restricted to per-user candidate supports known a priori
/// (for instance from earlier estimates used to schedule the users). With
/// pairwise disjoint supports the restricted matrix keeps the coherence of D
/// whatever the pilots are; overlapping supports make it rank deficient when
/// T_u < K.
EstimateReport uplink_sr_on_supports(const UplinkObservation& obs, const Dictionary& d,
                                     const std::vector<std::vector<Index>>& supports,
                                     const SolverOptions& opts = {});

enum class RecoveryMode { smv, mmv };

/// CS on Phi = A D. smv solves every UE antenna column separately; mmv solves
/// the joint-row-sparse problem over all columns.
EstimateReport downlink_cs(const DownlinkObservation& obs, const Dictionary& d,
                           const SolverOptions& opts = {}, RecoveryMode mode = RecoveryMode::smv);

/// H = A^+ Y. Flagged underdetermined when T_d < N.
EstimateReport downlink_ls(const DownlinkObservation& obs);

struct JointReport {
  CVector uplink;
  CVector downlink;
  std::vector<Index> support_u;  // atom indices into D_u
  std::vector<Index> support_d;  // atom indices into D_d
  double tau = 0.0;
  double epsilon = 0.0;
  SparseCode code;
  bool converged = false;
};

/// Mean column norm of A D_d over mean column norm of D_u.
double balancing_weight(const CMatrix& a, const Dictionary& d_u, const Dictionary& d_d);

/// Single-user uplink despread to y_u = h_u + w_u, stacked as [y_d; tau y_u]
/// against blockdiag(A D_d, tau D_u) with groups {j, j + M}. `tau` overrides
/// the balancing rule when given.
JointReport joint_estimate(const UplinkObservation& ul, const DownlinkObservation& dl,
                           const Dictionary& d_u, const Dictionary& d_d,
                           const SolverOptions& opts = {}, std::optional<double> tau = std::nullopt);

/// ||truth - estimate||_F^2 / ||truth||_F^2.
double nmse(const CMatrix& truth, const CMatrix& estimate);

}  // namespace fddcs
