#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "fddcs/dictionary.hpp"
#include "fddcs/random.hpp"
#include "fddcs/solvers.hpp"
#include "fddcs/types.hpp"

// Dictionary learning by alternating sparse coding (BPDN with a per-sample
// residual bound) and K-SVD atom updates. The joint variant codes uplink and
// downlink samples together with paired groups so both links share one
// support, then updates the two dictionaries independently.

namespace fddcs {

inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

/// Unit-norm training samples; `downlink` is filled for paired sets only.
struct TrainingSet {
  std::vector<CVector> samples;   // single-link samples, or the uplink halves
  std::vector<CVector> downlink;
  double learning_snr_db = kNoiselessSnr;

  bool paired() const { return !downlink.empty(); }
  std::size_t size() const { return samples.size(); }
  Index dimension() const { return samples.empty() ? 0 : samples.front().size(); }
  /// Fewer samples than atoms is allowed but makes learning ill-posed.
  bool undersized(Index atoms) const { return static_cast<Index>(size()) < atoms; }
};

/// Scales every sample to unit norm. Throws on empty input, mixed dimensions
/// or zero samples.
TrainingSet make_training_set(std::vector<CVector> samples);
TrainingSet make_paired_training_set(std::vector<CVector> uplink, std::vector<CVector> downlink);

/// h + w with w ~ CN(0, sigma^2 I), sigma^2 = ||h||^2 / (N 10^(snr/10)).
/// Infinite SNR returns h unchanged.
CVector add_measurement_noise(const CVector& h, double snr_db, Rng& rng);

/// Noisy copy of `set` (both halves of pairs), renormalized to unit norm.
TrainingSet corrupt_training_set(const TrainingSet& set, double snr_db, Rng& rng);

enum class DictionaryInit { odft, random, provided };

struct LearnConfig {
  Index atom_count = 128;
  double mismatch_tolerance = 0.1;  // eta, absolute on unit-norm samples
  int outer_iterations = 30;
  DictionaryInit init = DictionaryInit::odft;
  std::uint64_t seed = 0;
  std::optional<CMatrix> initial;  // required for DictionaryInit::provided
  // Iterates count as feasible when this fraction of samples meets eta.
  double feasible_fraction = 0.99;
  // Stop once mean l0 improves by less than this fraction over `window` iterations.
  double early_stop_improvement = 0.01;
  int early_stop_window = 3;
  SolverOptions solver;
};

void validate_learn_config(const LearnConfig& c, Index dimension);

struct IterationDiagnostics {
  int iteration = 0;
  double mean_l0 = 0.0;
  double mean_residual = 0.0;
  Index atoms_replaced = 0;
  Index skipped = 0;  // samples whose coding did not converge
  double feasible_fraction = 0.0;
};

struct LearnedModel {
  Dictionary dictionary;  // single-link, or the uplink dictionary
  Dictionary downlink;    // joint learning only
  std::vector<IterationDiagnostics> diagnostics;
  int best_iteration = 0;  // 1-based index into diagnostics
  bool feasible = false;   // best iterate met the feasibility fraction
};

/// Codes every sample with bpdn at epsilon = eta. `warm`, when given, must be
/// aligned with `samples` and seeds each solve.
std::vector<SparseCode> sparse_code_dataset(const CMatrix& d, const std::vector<CVector>& samples,
                                            double eta, const SolverOptions& opts = {},
                                            const std::vector<SparseCode>* warm = nullptr);

/// Joint coding of pairs: y = [h_d; h_u] against blockdiag(D_d, D_u) with
/// groups {j, j + M}. Coefficients are returned in that stacked order.
std::vector<SparseCode> sparse_code_joint(const CMatrix& d_u, const CMatrix& d_d,
                                          const std::vector<CVector>& uplink,
                                          const std::vector<CVector>& downlink, double eps,
                                          const SolverOptions& opts = {},
                                          const std::vector<SparseCode>* warm = nullptr);

struct KsvdResult {
  CMatrix dictionary;
  Index atoms_replaced = 0;
  // Squared representation error before the sweep and after each atom update.
  std::vector<double> error_trace;
};

/// One K-SVD sweep. codes(:, i) is the coefficient vector of samples[i] and is
/// updated together with the atoms. Samples with `skip[i]` set take no part.
/// Unused atoms and near-duplicates (|<d_i, d_j>| > 0.99) are replaced
/// afterwards by the worst-represented samples.
KsvdResult ksvd_update(const CMatrix& d, const std::vector<CVector>& samples, CMatrix& codes,
                       const std::vector<char>* skip = nullptr);

LearnedModel learn_dictionary(const TrainingSet& set, const LearnConfig& config);

/// Joint learning on a paired set. Both configs must agree on atom_count;
/// the stacked residual bound is sqrt(eta_u^2 + eta_d^2).
LearnedModel learn_joint(const TrainingSet& set, const LearnConfig& config_u,
                         const LearnConfig& config_d);

}  // namespace fddcs
