// Acceptance checks. Usage: acceptance <criterion 1-13> [--cache-dir DIR]
// Prints one PASS/FAIL line for the criterion (after any detail lines) and
// exits non-zero on failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "fddcs/estimators.hpp"
#include "fddcs/harness.hpp"
#include "fddcs/numerics.hpp"
#include "fddcs/pilots.hpp"
#include "fddcs/solvers.hpp"
#include "test_util.hpp"

using namespace fddcs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string cache_dir;

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

void note(const std::string& s) { std::cout << "  " << s << '\n'; }

HarnessOptions harness_options() {
  HarnessOptions o;
  o.cache_dir = cache_dir;
  o.log = &std::cerr;
  return o;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const ResultCell& cell(const ExperimentResult& r, double sweep, const std::string& method) {
  const ResultCell* c = r.find(sweep, method);
  if (!c) throw std::runtime_error("missing cell " + method + " at " + std::to_string(sweep));
  return *c;
}

// Standard error of the per-trial difference a - b. Every method sees the same
// channel, pilots and noise within a trial, so the comparison is paired.
double paired_stderr(const ResultCell& a, const ResultCell& b) {
  std::vector<double> d(a.samples.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.samples[i] - b.samples[i];
  return mean_and_stderr(d).second;
}

PilotMatrix unit_rows(const CMatrix& s) {
  PilotMatrix p;
  p.S = s;
  for (Index k = 0; k < s.rows(); ++k) p.S.row(k) /= s.row(k).norm();
  p.power = RVector::Ones(s.rows());
  return p;
}

// 1. Coherence of the Kronecker product.
Outcome kron_coherence() {
  std::mt19937_64 g(101);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Index k = 2 + i % 4, t = 1 + i % 3, n = 3 + i % 4, m = n + 1 + i % 5;
    const PilotMatrix s = unit_rows(testutil::random_matrix(k, t, g));
    Dictionary d;
    d.matrix = testutil::unit_columns(testutil::random_matrix(n, m, g));
    const CMatrix e = kron_sensing_matrix(s, d);
    const double expect = std::max(testutil::coherence(s.S.transpose()), testutil::coherence(d.matrix));
    worst = std::max(worst, std::abs(mutual_coherence(e) - expect));
  }
  return {worst <= 1e-10, "max deviation " + fmt("%.3g", worst) + " over 200 draws"};
}

// 2. Welch bound and designed pilots.
Outcome welch() {
  const bool exact = welch_bound(6, 5) == 0.2;
  double lowest_gap = 1.0;
  int hits = 0;
  PilotDesignOptions opts;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng = substream(2024, seed);
    const double mu = pilot_coherence(design_low_coherence(6, 5, opts, rng));
    if (mu <= 0.22) ++hits;
    lowest_gap = std::min(lowest_gap, mu - welch_bound(6, 5));
    Rng r2 = substream(2025, seed);
    for (auto [k, t] : {std::pair<Index, Index>{6, 5}, {8, 3}, {12, 7}, {4, 2}}) {
      lowest_gap = std::min(lowest_gap, pilot_coherence(random_pilots(k, t, r2)) - welch_bound(k, t));
      Rng r3 = substream(2026, seed, static_cast<std::uint64_t>(k));
      lowest_gap = std::min(lowest_gap, pilot_coherence(design_low_coherence(k, t, opts, r3)) - welch_bound(k, t));
    }
  }
  note("designed (6,5) within 0.22 for " + std::to_string(hits) + " of 50 seeds");
  note("smallest mu - bound seen " + fmt("%.3g", lowest_gap));
  return {exact && lowest_gap >= -1e-12 && hits >= 40,
          "welch(6,5) " + std::string(exact ? "== 0.2" : "!= 0.2") + ", " + std::to_string(hits) + "/50 seeds <= 0.22"};
}

// 3. Kronecker lifting identity.
Outcome lifting() {
  std::mt19937_64 g(103);
  Rng rng(103);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Index k = 1 + i % 5, t = 1 + i % 6, n = 2 + i % 7, m = n + i % 9;
    const PilotMatrix s = random_pilots(k, t, rng, 1.0 + i % 3);
    const CMatrix d = testutil::random_matrix(n, m, g);
    const CMatrix b = testutil::random_matrix(m, k, g);
    const CMatrix bc = b * s.C();
    const CVector lhs = kron_sensing_matrix(s.S, d) * fddcs::vec(bc);
    const CVector rhs = testutil::vec(d * bc * s.S);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-12, "max relative entry error " + fmt("%.3g", worst) + " over 100 draws"};
}

// 4. Solver against an independent slow reference.
Outcome solver_oracle() {
  std::mt19937_64 g(104);
  double worst = 0.0;
  int infeasible = 0, converged = 0;
  for (int i = 0; i < 50; ++i) {
    const Index rows = 3 + i % 6, m = rows + 1 + i % (13 - rows);
    const CMatrix phi = testutil::unit_columns(testutil::random_matrix(rows, m, g));
    CVector b = CVector::Zero(m);
    b(i % m) = testutil::gauss(g) + 1.0;
    b((i * 5 + 1) % m) += testutil::gauss(g);
    const CVector y = phi * b + 0.05 * testutil::random_matrix(rows, 1, g).col(0);
    SolverOptions o;
    o.epsilon = 0.02 + 0.01 * (i % 5);
    const SparseCode c = bpdn(phi, y, o);
    const auto ref = testutil::reference_bpdn(phi, y, o.epsilon);
    worst = std::max(worst, std::abs(testutil::l1(c.vector()) - ref.objective));
    if (c.converged) {
      ++converged;
      if ((y - phi * c.vector()).norm() > o.epsilon * (1 + 1e-6)) ++infeasible;
    }
  }
  return {worst <= 1e-4 && infeasible == 0 && converged == 50,
          "max objective gap " + fmt("%.3g", worst) + ", " + std::to_string(converged) + "/50 converged, " +
              std::to_string(infeasible) + " infeasible exits"};
}

// 5. Noiseless exact recovery on [I, F] with coherence 1/sqrt(N).
Outcome exact_recovery() {
  const Index n = 64;
  CMatrix phi(n, 2 * n);
  phi << CMatrix::Identity(n, n), dft_square(n).matrix;
  const double mu = testutil::coherence(phi);
  std::mt19937_64 g(105);
  int ok = 0, total = 0;
  double worst = 0.0;
  for (Index s = 1; s <= 4; ++s) {
    if (!(mu * static_cast<double>(2 * s - 1) < 1.0)) continue;
    for (int t = 0; t < 25; ++t) {
      std::vector<Index> idx(static_cast<std::size_t>(2 * n));
      std::iota(idx.begin(), idx.end(), Index{0});
      std::shuffle(idx.begin(), idx.end(), g);
      idx.resize(static_cast<std::size_t>(s));
      std::sort(idx.begin(), idx.end());
      CVector b = CVector::Zero(2 * n);
      for (Index i : idx) b(i) = std::polar(1.0 + std::abs(testutil::gauss(g)), 6.283 * std::uniform_real_distribution<>(0, 1)(g));
      const CVector y = phi * b;
      SolverOptions o;
      o.epsilon = 1e-7 * y.norm();
      const SparseCode c = bpdn(phi, y, o);
      const double e = nmse(b, c.vector());
      worst = std::max(worst, e);
      ++total;
      if (c.support == idx && e < 1e-8) ++ok;
    }
  }
  note("mu = " + fmt("%.4f", mu) + ", sparsity 1..4");
  return {ok == total && total == 100, std::to_string(ok) + "/" + std::to_string(total) +
                                           " exact supports, worst NMSE " + fmt("%.3g", worst)};
}

double mean_user_nmse(const CMatrix& h, const CMatrix& est) {
  double s = 0.0;
  for (Index u = 0; u < h.cols(); ++u) s += nmse(h.col(u), est.col(u));
  return s / static_cast<double>(h.cols());
}

// 6. Two users, one pilot symbol.
Outcome single_symbol_regime() {
  const Dictionary d = dft_overcomplete(16, 32);
  std::mt19937_64 g(106);
  Rng rng(106);
  SolverOptions o;
  o.epsilon = 1e-9;
  double worst_disjoint = 0.0, mean_same = 0.0, mean_plain = 0.0;
  double restricted_mu = 0.0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    const PilotMatrix p = random_pilots(2, 1, rng, 10.0);
    std::vector<Index> atoms(32);
    std::iota(atoms.begin(), atoms.end(), Index{0});
    std::shuffle(atoms.begin(), atoms.end(), g);
    const std::vector<std::vector<Index>> disjoint = {{atoms[0], atoms[1]}, {atoms[2], atoms[3]}};
    const std::vector<std::vector<Index>> same = {{atoms[0], atoms[1]}, {atoms[0], atoms[1]}};
    auto channels = [&](const std::vector<std::vector<Index>>& sup) {
      CMatrix h = CMatrix::Zero(16, 2);
      for (Index u = 0; u < 2; ++u)
        for (Index j : sup[static_cast<std::size_t>(u)]) h.col(u) += (testutil::gauss(g) + 1.0) * d.matrix.col(j);
      return h;
    };
    const CMatrix hd = channels(disjoint);
    const UplinkObservation od = simulate_uplink(hd, p, rng, true);
    worst_disjoint = std::max(worst_disjoint, mean_user_nmse(hd, uplink_sr_on_supports(od, d, disjoint, o).estimate));
    mean_plain += mean_user_nmse(hd, uplink_sr(od, d, o).estimate) / trials;
    const CMatrix e = kron_sensing_matrix(p, d);
    CMatrix sub(16, 4);
    sub << e.col(disjoint[0][0]), e.col(disjoint[0][1]), e.col(32 + disjoint[1][0]), e.col(32 + disjoint[1][1]);
    restricted_mu = std::max(restricted_mu, mutual_coherence(sub) - mutual_coherence(d.matrix));

    const CMatrix hs = channels(same);
    const UplinkObservation os = simulate_uplink(hs, p, rng, true);
    mean_same += mean_user_nmse(hs, uplink_sr_on_supports(os, d, same, o).estimate) / trials;
  }
  note("disjoint supports: worst NMSE " + fmt("%.3g", worst_disjoint) + ", restricted mu - mu{D} <= " +
       fmt("%.3g", restricted_mu));
  note("unrestricted SR on the same disjoint instances: mean NMSE " + fmt("%.3g", mean_plain));
  note("identical supports: mean NMSE " + fmt("%.3g", mean_same));
  return {worst_disjoint < 1e-8 && mean_same > 0.5 && restricted_mu <= 1e-10,
          "disjoint worst " + fmt("%.3g", worst_disjoint) + ", identical mean " + fmt("%.3g", mean_same)};
}

ScenarioConfig scenario(const std::string& json) { return parse_scenario(json); }

// 7. Sparsity medians.
Outcome sparsity() {
  const auto run = [](const std::string& extra) {
    return run_sparsity_cdf(scenario(R"({"schema": 1, "experiment": "sparsity_cdf")" + extra + "}"),
                            harness_options());
  };
  const ExperimentResult cal = run("");
  const ExperimentResult per = run(R"(, "uncertainty": {"perturbed_gains": 6, "perturbed_spacings": 6})");
  const double cl = median(cal.distributions.at("learned")), co = median(cal.distributions.at("odft")),
               cd = median(cal.distributions.at("dft"));
  const double pl = median(per.distributions.at("learned")), po = median(per.distributions.at("odft"));
  note("calibrated medians: learned " + fmt("%g", cl) + ", odft " + fmt("%g", co) + ", dft " + fmt("%g", cd));
  note("perturbed medians: learned " + fmt("%g", pl) + ", odft " + fmt("%g", po));
  return {cl <= co && co <= cd && pl <= 0.8 * po,
          "calibrated " + fmt("%g", cl) + " <= " + fmt("%g", co) + " <= " + fmt("%g", cd) + ", perturbed " +
              fmt("%g", pl) + " vs 0.8 x " + fmt("%g", po)};
}

// 8. Downlink NMSE ordering.
Outcome downlink_ordering() {
  const ExperimentResult cal =
      run_downlink_sweep(scenario(R"({"schema": 1, "experiment": "downlink_sweep"})"), harness_options());
  const ExperimentResult per = run_downlink_sweep(
      scenario(R"({"schema": 1, "experiment": "downlink_sweep",
                   "uncertainty": {"perturbed_gains": 6, "perturbed_spacings": 6}})"),
      harness_options());
  const std::vector<double> grid = cal.sweeps();
  bool order = true, perturbed = true;
  for (double t : grid) {
    const ResultCell &l = cell(cal, t, "learned"), &o = cell(cal, t, "odft"), &d = cell(cal, t, "dft");
    order = order && l.mean <= o.mean && o.mean <= d.mean;
    const ResultCell &pl = cell(per, t, "learned"), &po = cell(per, t, "odft");
    perturbed = perturbed && pl.mean < po.mean;
    note("T_d " + fmt("%g", t) + ": learned " + fmt("%.4g", l.mean) + " odft " + fmt("%.4g", o.mean) + " dft " +
         fmt("%.4g", d.mean) + " | perturbed learned " + fmt("%.4g", pl.mean) + " odft " + fmt("%.4g", po.mean));
  }
  const double mid = grid[grid.size() / 2];
  const ResultCell &l = cell(cal, mid, "learned"), &o = cell(cal, mid, "odft"), &d = cell(cal, mid, "dft");
  const double gap_lo = o.mean - l.mean, se_lo = paired_stderr(o, l);
  const double gap_od = d.mean - o.mean, se_od = paired_stderr(d, o);
  note("mid-grid T_d " + fmt("%g", mid) + ": odft - learned " + fmt("%.3g", gap_lo) + " (paired se " +
       fmt("%.3g", se_lo) + ", unpaired se " + fmt("%.3g", o.stderr_value) + "), dft - odft " + fmt("%.3g", gap_od) +
       " (paired se " + fmt("%.3g", se_od) + ")");
  const bool separated = gap_lo >= 2 * se_lo && gap_od >= 2 * se_od;
  return {order && perturbed && separated, std::string("ordering ") + (order ? "holds" : "violated") +
                                               ", perturbed " + (perturbed ? "holds" : "violated") +
                                               ", mid-grid 2se separation " + (separated ? "holds" : "missing")};
}

// 9. MMV against per-column SMV on a URA.
Outcome mmv_benefit() {
  const ExperimentResult r = run_downlink_sweep(
      scenario(R"({"schema": 1, "experiment": "downlink_sweep", "three_d": true, "recovery": "both",
                   "trials": 100, "grid": [4, 6, 8, 10, 12, 16],
                   "dictionaries": [{"name": "odft", "kind": "odft"}, {"name": "learned", "kind": "learn"}]})"),
      harness_options());
  bool ok = true;
  for (double t : r.sweeps())
    for (const char* name : {"odft", "learned"}) {
      const ResultCell &m = cell(r, t, std::string(name) + "-mmv"), &s = cell(r, t, std::string(name) + "-smv");
      ok = ok && m.mean <= s.mean;
      note("T_d " + fmt("%g", t) + " " + name + ": mmv " + fmt("%.4g", m.mean) + " smv " + fmt("%.4g", s.mean));
    }
  return {ok, std::string("mmv <= smv at every T_d: ") + (ok ? "yes" : "no")};
}

// 10. Uplink SR with fewer symbols than users.
Outcome uplink_claim() {
  const ExperimentResult r = run_uplink_sweep(
      scenario(R"({"schema": 1, "experiment": "uplink_sweep", "grid": [20]})"), harness_options());
  const ResultCell &sr = cell(r, 20, "sr-learned-designed"), &ls = cell(r, 20, "ls-orthogonal");
  note("SNR 20 dB: sr-learned-designed (T_u 5) " + fmt("%.4g", sr.mean) + " +- " + fmt("%.2g", sr.stderr_value) +
       ", ls-orthogonal (T_u 6) " + fmt("%.4g", ls.mean) + " +- " + fmt("%.2g", ls.stderr_value));
  if (const ResultCell* o = r.find(20, "sr-odft-designed")) note("sr-odft-designed " + fmt("%.4g", o->mean));
  return {sr.mean <= ls.mean, "SR " + fmt("%.4g", sr.mean) + " vs LS " + fmt("%.4g", ls.mean)};
}

// 11. Joint against independent estimation.
Outcome joint_gain() {
  const ExperimentResult r =
      run_joint_sweep(scenario(R"({"schema": 1, "experiment": "joint_sweep"})"), harness_options());
  bool ok = true;
  double largest = -1e300, smallest_t_gap = 0.0;
  const std::vector<double> grid = r.sweeps();
  for (double t : grid) {
    const ResultCell &j = cell(r, t, "joint-learned"), &i = cell(r, t, "independent-learned");
    ok = ok && j.mean <= i.mean;
    const double gap = i.mean - j.mean;
    if (t == grid.front()) smallest_t_gap = gap;
    largest = std::max(largest, gap);
    std::string line = "T_d " + fmt("%g", t) + ": joint " + fmt("%.4g", j.mean) + " independent " + fmt("%.4g", i.mean);
    if (const ResultCell* jo = r.find(t, "joint-odft"))
      line += " | joint-odft " + fmt("%.4g", jo->mean) + " independent-odft " + fmt("%.4g", cell(r, t, "independent-odft").mean);
    note(line);
  }
  const bool peak = smallest_t_gap >= largest;
  return {ok && peak, std::string("joint <= independent everywhere: ") + (ok ? "yes" : "no") +
                          ", largest gap at smallest T_d: " + (peak ? "yes" : "no")};
}

// 12. Noisy-learning trend.
Outcome noisy_learning() {
  const ExperimentResult r = run_noisy_learning_sweep(
      scenario(R"({"schema": 1, "experiment": "noisy_learning_sweep"})"), harness_options());
  const std::vector<double> grid = r.sweeps();
  bool monotone = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ResultCell& c = cell(r, grid[i], "learned");
    note("learning SNR " + fmt("%g", grid[i]) + " dB: NMSE " + fmt("%.4g", c.mean) + " +- " + fmt("%.2g", c.stderr_value));
    if (i > 0) {
      const ResultCell& p = cell(r, grid[i - 1], "learned");
      monotone = monotone && c.mean <= p.mean + c.stderr_value;
    }
  }
  const double n30 = cell(r, 30, "learned").mean;
  const double ninf = cell(r, grid.back(), "learned").mean;
  const bool close = std::abs(n30 - ninf) <= 0.2 * ninf;
  return {monotone && close, std::string("non-increasing within 1 se: ") + (monotone ? "yes" : "no") +
                                 ", 30 dB vs inf " + fmt("%.4g", n30) + " / " + fmt("%.4g", ninf)};
}

std::string csv_bytes(const ExperimentResult& r) {
  std::ostringstream s;
  emit_csv(r, s);
  return s.str();
}

// 13. Byte-identical reruns, including a learned dictionary written to and
// read back from a fresh cache.
Outcome determinism() {
  const std::filesystem::path fresh = std::filesystem::path(cache_dir.empty() ? "." : cache_dir) / "determinism";
  std::filesystem::remove_all(fresh);
  HarnessOptions o;
  o.cache_dir = fresh.string();
  const std::vector<std::string> configs = {
      R"({"schema": 1, "experiment": "downlink_sweep", "n1": 16, "atoms": 64, "training": 400, "trials": 20,
          "grid": [6, 10], "dictionaries": [{"name": "dft", "kind": "dft"}, {"name": "odft", "kind": "odft"},
                                            {"name": "learned", "kind": "learn", "iterations": 4}]})",
      R"({"schema": 1, "experiment": "uplink_sweep", "n1": 16, "atoms": 64, "trials": 10, "grid": [10, 20],
          "pilot_kinds": ["designed", "random"], "dictionaries": [{"name": "odft", "kind": "odft"}]})",
      R"({"schema": 1, "experiment": "joint_sweep", "n1": 16, "atoms": 64, "trials": 10, "grid": [4, 8],
          "dictionaries": [{"name": "odft", "kind": "joint_odft"}, {"name": "odft", "kind": "odft"}]})",
      R"({"schema": 1, "experiment": "sparsity_cdf", "n1": 16, "atoms": 64, "trials": 50,
          "dictionaries": [{"name": "odft", "kind": "odft"}]})"};
  int same = 0;
  for (const std::string& j : configs) {
    const ScenarioConfig c = scenario(j);
    const std::string a = csv_bytes(run_experiment(c, o));
    const std::string b = csv_bytes(run_experiment(c, o));
    if (a == b) ++same;
    note(to_string(c.family) + ": " + std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "DIFFERENT"));
  }
  std::filesystem::remove_all(fresh);
  return {same == static_cast<int>(configs.size()),
          std::to_string(same) + "/" + std::to_string(configs.size()) + " families byte-identical on rerun"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int criterion = 0;
  app.add_option("criterion", criterion, "criterion number 1-13")->required()->check(CLI::Range(1, 13));
  app.add_option("--cache-dir", cache_dir, "directory for learned dictionaries");
  CLI11_PARSE(app, argc, argv);
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);

  const std::vector<std::function<Outcome()>> checks = {
      kron_coherence, welch,      lifting,      solver_oracle, exact_recovery, single_symbol_regime, sparsity,
      downlink_ordering, mmv_benefit, uplink_claim, joint_gain, noisy_learning, determinism};
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = checks[static_cast<std::size_t>(criterion - 1)]();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "criterion " << criterion << ": " << (out.pass ? "PASS" : "FAIL") << "  " << out.detail << "  ("
            << fmt("%.1f", secs) << " s)" << std::endl;
  return out.pass ? 0 : 1;
}
