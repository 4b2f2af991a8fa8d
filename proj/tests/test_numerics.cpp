#include <doctest.h>

#include "fddcs/numerics.hpp"
#include "test_util.hpp"

using namespace fddcs;

namespace {

double rel(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / std::max(1e-300, b.norm()); }

void check_penrose(const CMatrix& x, double tol) {
  const CMatrix p = pseudo_inverse(x);
  CHECK(rel(x * p * x, x) < tol);
  CHECK(rel(p * x * p, p) < tol);
  const CMatrix xp = x * p;
  const CMatrix px = p * x;
  CHECK(rel(xp.adjoint(), xp) < tol);
  CHECK(rel(px.adjoint(), px) < tol);
}

}  // namespace

TEST_CASE("pseudo-inverse of identity and of a singular diagonal") {
  const CMatrix i3 = CMatrix::Identity(3, 3);
  CHECK((pseudo_inverse(i3) - i3).norm() < 1e-14);
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 2.0;
  const CMatrix p = pseudo_inverse(d);
  CHECK(std::abs(p(0, 0) - Complex(0.5)) < 1e-14);
  CHECK(std::abs(p(1, 1)) < 1e-14);
  CHECK(std::abs(p(0, 1)) + std::abs(p(1, 0)) < 1e-14);
}

TEST_CASE("pseudo-inverse satisfies the Penrose identities across shapes") {
  std::mt19937_64 rng(3);
  check_penrose(testutil::random_matrix(4, 6, rng), 1e-10);
  check_penrose(testutil::random_matrix(7, 3, rng), 1e-10);
  check_penrose(testutil::random_matrix(5, 5, rng), 1e-10);
  // rank 2 in a 6 x 5 matrix
  const CMatrix low = testutil::random_matrix(6, 2, rng) * testutil::random_matrix(2, 5, rng);
  check_penrose(low, 1e-8);
  CHECK(numerical_rank(low) == 2);
}

TEST_CASE("pseudo-inverse rejects non-finite input") {
  CMatrix x = CMatrix::Identity(2, 2);
  x(1, 0) = Complex(std::nan(""), 0.0);
  CHECK_THROWS_AS(pseudo_inverse(x), std::invalid_argument);
}

TEST_CASE("svd reconstructs with descending singular values") {
  std::mt19937_64 rng(5);
  for (auto [r, c] : {std::pair<Index, Index>{8, 3}, {3, 8}, {64, 256}}) {
    const CMatrix x = testutil::random_matrix(r, c, rng);
    const auto s = svd(x);
    const CMatrix back = s.U * s.singular_values.cast<Complex>().asDiagonal() * s.V.adjoint();
    CHECK(rel(back, x) < 1e-10);
    for (Index i = 1; i < s.singular_values.size(); ++i)
      CHECK(s.singular_values(i) <= s.singular_values(i - 1));
    CHECK(s.singular_values.minCoeff() >= 0.0);
  }
}

TEST_CASE("least squares: identity, consistent and minimum-norm cases") {
  std::mt19937_64 rng(7);
  const CMatrix y = testutil::random_matrix(4, 2, rng);
  CHECK((least_squares(CMatrix::Identity(4, 4), y) - y).norm() < 1e-14);

  const CMatrix x = testutil::random_matrix(9, 4, rng);
  const CMatrix b = testutil::random_matrix(4, 1, rng);
  CHECK((least_squares(x, x * b) - b).norm() < 1e-10);

  // Underdetermined: every feasible point b + z with z in null(W) is longer.
  const CMatrix w = testutil::random_matrix(3, 6, rng);
  const CMatrix rhs = testutil::random_matrix(3, 1, rng);
  const CMatrix sol = least_squares(w, rhs);
  CHECK((w * sol - rhs).norm() < 1e-10);
  const Eigen::FullPivLU<CMatrix> lu(w);
  const CMatrix null = lu.kernel();
  REQUIRE(null.cols() == 3);
  for (int t = 0; t < 20; ++t) {
    const CMatrix cand = sol + null * testutil::random_matrix(3, 1, rng);
    CHECK((w * cand - rhs).norm() < 1e-9);
    CHECK(cand.norm() >= sol.norm() - 1e-12);
  }
  CHECK_THROWS_AS(least_squares(w, testutil::random_matrix(4, 1, rng)), std::invalid_argument);
}

TEST_CASE("truncated Gram factor") {
  std::mt19937_64 rng(11);
  const CMatrix s3 = truncated_gram_factor(CMatrix::Identity(3, 3), 3);
  CHECK((s3.adjoint() * s3 - CMatrix::Identity(3, 3)).norm() < 1e-12);

  const CMatrix v = testutil::random_matrix(4, 1, rng);
  const CMatrix g1 = v * v.adjoint();
  const CMatrix s1 = truncated_gram_factor(g1, 1);
  CHECK(s1.rows() == 1);
  CHECK((g1 - s1.adjoint() * s1).norm() < 1e-10);

  // Eckart-Young: the error equals the norm of the discarded eigenvalues.
  const CMatrix a = testutil::random_matrix(5, 5, rng);
  const CMatrix g = a * a.adjoint();
  const CMatrix s2 = truncated_gram_factor(g, 2);
  const Eigen::SelfAdjointEigenSolver<CMatrix> eig(g);
  double tail = 0.0;
  for (Index i = 0; i < 3; ++i) tail += eig.eigenvalues()(i) * eig.eigenvalues()(i);
  CHECK(std::abs((g - s2.adjoint() * s2).norm() - std::sqrt(tail)) < 1e-9 * g.norm());

  CMatrix bad = g;
  bad(0, 1) += 1.0;
  CHECK_THROWS_AS(truncated_gram_factor(bad, 2), std::invalid_argument);
  CHECK_THROWS_AS(truncated_gram_factor(g, 6), std::invalid_argument);
}

TEST_CASE("kron and vec match index-loop definitions") {
  std::mt19937_64 rng(13);
  const CMatrix a = testutil::random_matrix(2, 3, rng);
  const CMatrix b = testutil::random_matrix(4, 2, rng);
  CHECK((kron(a, b) - testutil::kron(a, b)).norm() < 1e-15);
  CHECK((vec(a) - testutil::vec(a)).norm() < 1e-15);
}

TEST_CASE("numerics is generic over the scalar type") {
  const Eigen::MatrixXd x = (Eigen::MatrixXd(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  const Eigen::MatrixXd p = pseudo_inverse(x);
  CHECK((x * p * x - x).norm() < 1e-12);
}
