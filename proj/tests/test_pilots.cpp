#include <doctest.h>

#include "fddcs/pilots.hpp"
#include "test_util.hpp"

using namespace fddcs;

namespace {

double pilot_mu(const PilotMatrix& p) { return testutil::coherence(p.S.transpose()); }

}  // namespace

TEST_CASE("orthogonal pilots") {
  const PilotMatrix sq = orthogonal_pilots(4, 4);
  CHECK((sq.S * sq.S.adjoint() - CMatrix::Identity(4, 4)).norm() < 1e-12);
  CHECK(pilot_coherence(sq) < 1e-12);
  const PilotMatrix wide = orthogonal_pilots(4, 6, 2.0);
  CHECK(wide.S.rows() == 4);
  CHECK(wide.S.cols() == 6);
  CHECK((wide.S * wide.S.adjoint() - CMatrix::Identity(4, 4)).norm() < 1e-12);
  for (Index k = 0; k < 4; ++k) CHECK(wide.power(k) == doctest::Approx(12.0));
  CHECK_THROWS_AS(orthogonal_pilots(5, 4), std::invalid_argument);
}

TEST_CASE("random pilots") {
  Rng a(5), b(5);
  const PilotMatrix x = random_pilots(2, 1, a);
  CHECK(pilot_coherence(x) == doctest::Approx(1.0));
  const PilotMatrix p = random_pilots(6, 5, a);
  const PilotMatrix q = random_pilots(2, 1, b);
  CHECK(q.S == x.S);
  for (Index k = 0; k < 6; ++k) CHECK(p.S.row(k).norm() == doctest::Approx(1.0).epsilon(1e-12));
  // Typical coherence of random 6 x 5 pilots sits well above the bound 0.2.
  Rng r(9);
  double mean = 0.0;
  for (int t = 0; t < 200; ++t) mean += pilot_mu(random_pilots(6, 5, r)) / 200.0;
  CHECK(mean > 0.4);
}

TEST_CASE("pilot coherence matches the loop oracle") {
  Rng r(10);
  for (int t = 0; t < 20; ++t) {
    const PilotMatrix p = random_pilots(3 + t % 5, 2 + t % 3, r);
    CHECK(pilot_coherence(p) == doctest::Approx(pilot_mu(p)).epsilon(1e-12));
  }
}

TEST_CASE("Gram shrinkage design never loses to its initialization") {
  PilotDesignOptions o;
  o.gamma = 0.95;
  o.shrink_percent = 20;
  o.iterations = 100;
  int better = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng init(seed), run(seed);
    // design_low_coherence starts from random_pilots drawn from the same stream.
    const double mu0 = pilot_coherence(random_pilots(6, 5, init));
    const PilotMatrix d = design_low_coherence(6, 5, o, run);
    const double mu = pilot_coherence(d);
    if (mu <= mu0 + 1e-12) ++better;
    CHECK(mu >= welch_bound(6, 5) - 1e-12);
    for (Index k = 0; k < 6; ++k) CHECK(d.S.row(k).norm() == doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK(better >= 90);
  Rng r(1);
  CHECK_THROWS_AS(design_low_coherence(4, 4, o, r), std::invalid_argument);
  o.gamma = 1.5;
  CHECK_THROWS_AS(design_low_coherence(6, 5, o, r), std::invalid_argument);
}

TEST_CASE("Kronecker sensing matrix coherence and lifting") {
  std::mt19937_64 g(12);
  Rng r(12);
  for (int t = 0; t < 20; ++t) {
    const PilotMatrix s = random_pilots(3, 2, r);
    Dictionary d;
    d.matrix = testutil::unit_columns(testutil::random_matrix(4, 6, g));
    const CMatrix e = kron_sensing_matrix(s, d);
    CHECK(e.rows() == 8);
    CHECK(e.cols() == 18);
    CHECK((e - testutil::kron(s.S.transpose(), d.matrix)).norm() < 1e-13);
    const double expect = std::max(pilot_mu(s), testutil::coherence(d.matrix));
    CHECK(std::abs(testutil::coherence(e) - expect) < 1e-10);

    const CMatrix b = testutil::random_matrix(6, 3, g);
    const CMatrix bc = b * s.C();
    const CVector lhs = e * testutil::vec(bc);
    const CVector rhs = testutil::vec(d.matrix * bc * s.S);
    CHECK((lhs - rhs).norm() < 1e-12 * std::max(1.0, rhs.norm()));
  }
  Dictionary d;
  d.matrix = testutil::unit_columns(testutil::random_matrix(4, 6, g));
  CHECK(testutil::coherence(kron_sensing_matrix(orthogonal_pilots(3, 3), d)) ==
        doctest::Approx(testutil::coherence(d.matrix)).epsilon(1e-10));
}

TEST_CASE("restricted coherence with disjoint supports ignores the pilots") {
  std::mt19937_64 g(13);
  Rng r(13);
  Dictionary d;
  d.matrix = testutil::unit_columns(testutil::random_matrix(6, 12, g));
  const PilotMatrix s = random_pilots(2, 1, r);
  const CMatrix e = kron_sensing_matrix(s, d);
  // Users 0 and 1 on atoms {0, 1} and {5, 7}.
  CMatrix sub(6, 4);
  sub << e.col(0), e.col(1), e.col(12 + 5), e.col(12 + 7);
  CHECK(testutil::coherence(sub) <= testutil::coherence(d.matrix) + 1e-10);
  // Same atoms for both users: restricted columns coincide up to phase.
  CMatrix same(6, 2);
  same << e.col(3), e.col(12 + 3);
  CHECK(testutil::coherence(same) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("disjoint-support scheduling") {
  CHECK(schedule_disjoint_users({{0}, {1}, {2, 3}}, 3) == std::vector<Index>{0, 1, 2});
  CHECK(schedule_disjoint_users({{4, 5}, {4, 5}}, 2).size() == 1);
  CHECK(schedule_disjoint_users({{1, 2}, {2, 3}, {4}}, 3) == std::vector<Index>{2, 0});
  CHECK(schedule_disjoint_users({{1}, {2}, {3}}, 2).size() == 2);
}

TEST_CASE("downlink pilots") {
  Rng r(14);
  double s = 0.0;
  for (int t = 0; t < 100; ++t) s += downlink_pilots(40, 100, 10.0, r).A.squaredNorm();
  const double ratio = s / 100.0 / (10.0 * 40.0);
  CHECK(ratio >= 0.9);
  CHECK(ratio <= 1.1);
  Rng a(3), b(3);
  CHECK(downlink_pilots(4, 8, 1.0, a).A == downlink_pilots(4, 8, 1.0, b).A);
  CHECK(downlink_pilots(4, 8, 0.0, a).A.norm() == 0.0);
}
