#include <doctest.h>

#include "fddcs/estimators.hpp"
#include "test_util.hpp"

using namespace fddcs;

namespace {

// Channel built from dictionary atoms `idx`.
CVector on_grid(const Dictionary& d, const std::vector<Index>& idx, std::mt19937_64& g) {
  CVector h = CVector::Zero(d.rows());
  for (Index j : idx) h += (testutil::gauss(g) + Complex(1.0)) * d.matrix.col(j);
  return h;
}

SolverOptions exact() {
  SolverOptions o;
  o.epsilon = 1e-9;
  return o;
}

}  // namespace

TEST_CASE("nmse") {
  CMatrix h(2, 1);
  h << 1.0, Complex(0.0, 2.0);
  CHECK(nmse(h, h) == 0.0);
  CHECK(nmse(h, CMatrix::Zero(2, 1)) == 1.0);
  CHECK(nmse(h, 2.0 * h) == doctest::Approx(1.0));
  CHECK_THROWS_AS(nmse(CMatrix::Zero(2, 1), h), std::invalid_argument);
  CHECK_THROWS_AS(nmse(h, CMatrix::Zero(3, 1)), std::invalid_argument);
}

TEST_CASE("uplink simulation and LS") {
  std::mt19937_64 g(1);
  Rng rng(1);
  const CMatrix h = testutil::random_matrix(8, 4, g);
  const PilotMatrix p = orthogonal_pilots(4, 4, 10.0);
  const UplinkObservation clean = simulate_uplink(h, p, rng, true);
  CHECK((clean.y - h * p.C() * p.S).norm() < 1e-12);
  const EstimateReport ls = uplink_ls(clean);
  CHECK_FALSE(ls.underdetermined);
  CHECK(nmse(h, ls.estimate) < 1e-20);

  Rng a(5), b(5);
  CHECK(simulate_uplink(h, p, a).y == simulate_uplink(h, p, b).y);

  Rng r2(2);
  const PilotMatrix few = random_pilots(4, 2, r2, 10.0);
  const EstimateReport under = uplink_ls(simulate_uplink(h, few, r2, true));
  CHECK(under.underdetermined);
  CHECK(nmse(h, under.estimate) > 0.2);
  CHECK_THROWS_AS(simulate_uplink(testutil::random_matrix(8, 3, g), p, rng), std::invalid_argument);
}

TEST_CASE("de-spreading leaves noise of variance 1 / (rho T)") {
  std::mt19937_64 g(2);
  Rng rng(2);
  const double rho = 4.0;
  const Index t = 5;
  const CMatrix h = testutil::random_matrix(16, 1, g);
  PilotMatrix p = orthogonal_pilots(1, t, rho);
  double var = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const UplinkObservation o = simulate_uplink(h, p, rng);
    const CMatrix x = p.C() * p.S;
    const CMatrix est = o.y * x.adjoint() / x.squaredNorm();
    var += (est - h).squaredNorm() / 16.0 / n;
  }
  CHECK(var == doctest::Approx(1.0 / (rho * t)).epsilon(0.05));
}

TEST_CASE("LS noise scales with pilot power") {
  std::mt19937_64 g(3);
  const CMatrix h = testutil::random_matrix(16, 4, g);
  auto avg = [&](double rho) {
    Rng rng(3);
    double s = 0.0;
    for (int i = 0; i < 1000; ++i) s += nmse(h, uplink_ls(simulate_uplink(h, orthogonal_pilots(4, 4, rho), rng)).estimate);
    return s / 1000.0;
  };
  const double lo = avg(2.0), hi = avg(4.0);
  CHECK(10.0 * std::log10(hi / lo) == doctest::Approx(-3.0103).epsilon(0.03));
}

TEST_CASE("downlink LS and CS in the noiseless regime") {
  std::mt19937_64 g(4);
  Rng rng(4);
  const Dictionary d = dft_overcomplete(32, 128);
  const CMatrix h = on_grid(d, {10, 70}, g);
  DownlinkPilots full{std::sqrt(10.0) * CMatrix::Identity(32, 32), 10.0};
  const DownlinkObservation o = simulate_downlink(h, full, rng, true);
  CHECK(nmse(h, downlink_ls(o).estimate) < 1e-20);
  CHECK(nmse(h, downlink_cs(o, d, exact()).estimate) < 1e-10);

  const DownlinkPilots half = downlink_pilots(16, 32, 10.0, rng);
  const EstimateReport ls = downlink_ls(simulate_downlink(h, half, rng, true));
  CHECK(ls.underdetermined);
  CHECK(nmse(h, ls.estimate) > 0.2);

  // One on-grid atom, 8 measurements.
  const CMatrix h1 = d.matrix.col(77) * Complex(0.3, 0.9);
  const DownlinkPilots a8 = downlink_pilots(8, 32, 10.0, rng);
  const EstimateReport cs = downlink_cs(simulate_downlink(h1, a8, rng, true), d, exact());
  CHECK(cs.supports.front() == std::vector<Index>{77});
  CHECK(nmse(h1, cs.estimate) < 1e-8);
  CHECK_THROWS_AS(downlink_cs(simulate_downlink(h1, a8, rng), d, {}, RecoveryMode::mmv), std::invalid_argument);
}

TEST_CASE("mmv and smv on a multi-antenna UE") {
  std::mt19937_64 g(5);
  Rng rng(5);
  const Dictionary d = dft_overcomplete(16, 64);
  CMatrix h(16, 4);
  for (Index c = 0; c < 4; ++c) h.col(c) = on_grid(d, {5, 30, 51}, g);
  const DownlinkPilots a = downlink_pilots(10, 16, 10.0, rng);
  const DownlinkObservation o = simulate_downlink(h, a, rng, true);
  const EstimateReport m = downlink_cs(o, d, exact(), RecoveryMode::mmv);
  CHECK(m.estimate.cols() == 4);
  CHECK(m.supports.size() == 4);
  CHECK(nmse(h, m.estimate) < 1e-8);
  const EstimateReport s = downlink_cs(o, d, exact(), RecoveryMode::smv);
  CHECK(s.estimate.cols() == 4);
}

TEST_CASE("uplink SR recovers on-grid users") {
  std::mt19937_64 g(6);
  Rng rng(6);
  const Dictionary d = dft_overcomplete(16, 32);
  CMatrix h(16, 2);
  h.col(0) = on_grid(d, {3}, g);
  h.col(1) = on_grid(d, {20}, g);
  const PilotMatrix p = orthogonal_pilots(2, 2, 10.0);
  const EstimateReport r = uplink_sr(simulate_uplink(h, p, rng, true), d, exact());
  CHECK(r.converged);
  CHECK(nmse(h, r.estimate) < 1e-8);
  CHECK(r.supports[0] == std::vector<Index>{3});
  CHECK(r.supports[1] == std::vector<Index>{20});
}

TEST_CASE("uplink SR on known supports with one pilot symbol") {
  std::mt19937_64 g(7);
  Rng rng(7);
  const Dictionary d = dft_overcomplete(16, 32);
  const PilotMatrix p = random_pilots(2, 1, rng, 10.0);
  CMatrix h(16, 2);
  h.col(0) = on_grid(d, {4, 9}, g);
  h.col(1) = on_grid(d, {17, 25}, g);
  const UplinkObservation o = simulate_uplink(h, p, rng, true);
  const EstimateReport r = uplink_sr_on_supports(o, d, {{4, 9}, {17, 25}}, exact());
  CHECK(nmse(h, r.estimate) < 1e-8);
  CHECK(r.supports[0] == std::vector<Index>{4, 9});
  CHECK(r.supports[1] == std::vector<Index>{17, 25});

  // Identical supports: only the sum s1 h1 + s2 h2 is observed.
  CMatrix same(16, 2);
  same.col(0) = on_grid(d, {4, 9}, g);
  same.col(1) = on_grid(d, {4, 9}, g);
  const EstimateReport bad = uplink_sr_on_supports(simulate_uplink(same, p, rng, true), d, {{4, 9}, {4, 9}}, exact());
  CHECK(nmse(same, bad.estimate) > 0.05);
  CHECK_THROWS_AS(uplink_sr_on_supports(o, d, {{4}}, exact()), std::invalid_argument);
  CHECK_THROWS_AS(uplink_sr_on_supports(o, d, {{40}, {1}}, exact()), std::invalid_argument);
}

TEST_CASE("joint estimation") {
  std::mt19937_64 g(8);
  Rng rng(8);
  const double c = kSpeedOfLight;
  auto [du, dd] = joint_odft(32, 64, c / (2 * 2010e6), c / 1920e6, c / 2110e6);
  const std::vector<Index> support = {7};
  CMatrix hu(32, 1), hd(32, 1);
  hu.col(0) = on_grid(du, support, g);
  hd.col(0) = on_grid(dd, support, g);
  const PilotMatrix p = orthogonal_pilots(1, 2, 10.0);
  const UplinkObservation ul = simulate_uplink(hu, p, rng, true);
  const DownlinkPilots a = downlink_pilots(4, 32, 10.0, rng);
  const DownlinkObservation dl = simulate_downlink(hd, a, rng, true);

  const JointReport j = joint_estimate(ul, dl, du, dd, exact());
  CHECK(j.converged);
  CHECK(j.support_u == j.support_d);
  CHECK(j.support_d == support);
  CHECK(nmse(hd, j.downlink) < 1e-8);
  CHECK(nmse(hu, j.uplink) < 1e-8);
  // The uplink block can only help the downlink fit.
  const EstimateReport alone = downlink_cs(dl, dd, exact());
  CHECK(nmse(hd, j.downlink) <= nmse(hd, alone.estimate) + 1e-12);
  CHECK(j.tau == doctest::Approx(balancing_weight(a.A, du, dd)));

  // tau = 0 leaves only the downlink block.
  const DownlinkPilots a12 = downlink_pilots(12, 32, 10.0, rng);
  const DownlinkObservation noisy = simulate_downlink(hd, a12, rng);
  const JointReport z = joint_estimate(simulate_uplink(hu, p, rng), noisy, du, dd, {}, 0.0);
  const EstimateReport ind = downlink_cs(noisy, dd);
  CHECK(nmse(ind.estimate, z.downlink) < 1e-6);
  CHECK_THROWS_AS(joint_estimate(simulate_uplink(CMatrix::Ones(32, 2), orthogonal_pilots(2, 2), rng), dl, du, dd),
                  std::invalid_argument);
}
