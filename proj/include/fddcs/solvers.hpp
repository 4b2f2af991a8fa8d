#pragma once

#include <memory>
#include <vector>

#include "fddcs/types.hpp"

// Convex sparse recovery under a residual bound:
//
//   minimize  sum_g ||beta_g||   subject to  ||Y - Phi beta||_F <= epsilon
//
// where g runs over a partition of the coefficient rows. Singleton groups give
// BPDN, singleton rows of a multi-column beta give the l1,2 (MMV) problem, and
// paired groups give the group-l1 joint coding. The constrained problem is
// solved through the penalized form lambda * sum_g ||beta_g|| + 1/2 ||r||^2
// and a one-dimensional search on lambda until ||r|| meets epsilon.

namespace fddcs {

enum class InnerSolver {
  semismooth_newton,     // Newton on the proximal fixed-point residual
  coordinate_descent,    // exact block minimization with cached Gram columns
  accelerated_gradient,  // FISTA with adaptive restart
};

struct SolverOptions {
  double epsilon = 0.0;
  int max_iterations = 5000;       // inner iterations per lambda
  int max_outer_iterations = 40;   // lambda search steps
  double objective_tolerance = 1e-7;
  // A lambda is accepted once epsilon (1 - residual_tolerance) <= ||r|| <= epsilon.
  double residual_tolerance = 1e-4;
  double support_threshold = 1e-3;
  InnerSolver inner = InnerSolver::semismooth_newton;
};

/// Partition of coefficient rows into groups.
struct GroupStructure {
  std::vector<std::vector<Index>> groups;

  Index coefficient_count() const;
  static GroupStructure singletons(Index n);
  /// Groups {j, j + m} for j < m: element j of the first block with element j
  /// of the second.
  static GroupStructure paired(Index m);
};

/// Throws std::invalid_argument unless `groups` partitions {0, ..., n-1}.
void validate_groups(const GroupStructure& groups, Index n);

struct SparseCode {
  CMatrix beta;  // n x R (R = 1 for single-vector problems)
  std::vector<Index> support;
  double residual_norm = 0.0;
  double lambda = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
  int outer_iterations = 0;
  bool converged = false;

  CVector vector() const { return beta.col(0); }
  Index l0() const { return static_cast<Index>(support.size()); }
};

/// Rows whose l2 norm exceeds threshold * (largest row norm). Empty for beta = 0.
std::vector<Index> support_of(const CMatrix& beta, double threshold);

/// Coefficient indices of every group whose norm exceeds threshold * (largest
/// group norm).
std::vector<Index> group_support(const CMatrix& beta, const GroupStructure& groups,
                                 double threshold);

/// sqrt(dim + 2 sqrt(dim)): mean plus two standard deviations of the squared
/// norm of a dim-dimensional unit-variance complex Gaussian noise vector.
double noise_epsilon(Index dim, double noise_variance = 1.0);

/// Reusable solver for one measurement matrix. Gram columns are computed on
/// first use and cached, so repeated solves against the same Phi (dictionary
/// learning, Monte-Carlo trials) amortize the setup. Not safe to share between
/// threads; give each worker its own instance.
class SparseSolver {
 public:
  explicit SparseSolver(CMatrix phi);
  SparseSolver(CMatrix phi, GroupStructure groups);
  ~SparseSolver();
  SparseSolver(SparseSolver&&) noexcept;
  SparseSolver& operator=(SparseSolver&&) noexcept;

  /// Solves for measurements Y (rows(Phi) x R). `warm` seeds beta and lambda.
  SparseCode solve(const CMatrix& y, const SolverOptions& opts,
                   const SparseCode* warm = nullptr) const;

  const CMatrix& matrix() const;
  const GroupStructure& groups() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SparseCode bpdn(const CMatrix& phi, const CVector& y, const SolverOptions& opts);
SparseCode mmv_bpdn(const CMatrix& phi, const CMatrix& y, const SolverOptions& opts);
SparseCode group_bpdn(const CMatrix& g, const CVector& y, const GroupStructure& groups,
                      const SolverOptions& opts);

struct DebiasResult {
  CVector beta;
  bool rank_deficient = false;
};

/// Least-squares refit restricted to `support`, zeros elsewhere.
DebiasResult debias_on_support(const CMatrix& phi, const CVector& y,
                               const std::vector<Index>& support);

}  // namespace fddcs
