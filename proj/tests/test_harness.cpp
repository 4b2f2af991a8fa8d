#include <doctest.h>

#include <sstream>

#include "fddcs/harness.hpp"
#include "fddcs/matrix_io.hpp"

using namespace fddcs;

namespace {

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream s;
  emit_csv(r, s);
  return s.str();
}

}  // namespace

TEST_CASE("scenario parsing applies presets and rejects bad input") {
  const ScenarioConfig c = parse_scenario(R"({"schema": 1, "experiment": "downlink_sweep", "trials": 3})");
  CHECK(c.family == ExperimentFamily::downlink_sweep);
  CHECK(c.trials == 3);
  CHECK(c.n1 == 32);
  CHECK(c.atoms == 128);
  CHECK_FALSE(c.grid.empty());

  const ScenarioConfig p = parse_scenario(R"({"schema": 1, "experiment": "sparsity_cdf", "preset": "paper"})");
  CHECK(p.n1 == 100);
  CHECK(p.atoms == 400);
  CHECK(p.training == 10000);

  CHECK_THROWS_AS(parse_scenario(R"({"experiment": "downlink_sweep"})"), FormatError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 2, "experiment": "downlink_sweep"})"), FormatError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "experiment": "downlink_sweep", "trails": 3})"), FormatError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "experiment": "downlink_sweep", "grid": []})"), FormatError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "experiment": "downlink_sweep", "trials": 0})"), FormatError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "experiment": "uplink_sweep", "pilot_kinds": ["orthogonal"]})"),
                  FormatError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "experiment": "uplink_sweep", "ls_symbols": 5})"), FormatError);
  CHECK_THROWS_AS(parse_scenario(R"({"schema": 1, "experiment": "nope"})"), FormatError);
  CHECK_THROWS_AS(parse_scenario("{not json"), FormatError);
  CHECK_THROWS_AS(
      parse_scenario(R"({"schema": 1, "experiment": "downlink_sweep",
                         "dictionaries": [{"name": "x", "kind": "file", "path": "/nonexistent.dict"}]})"),
      FormatError);
}

TEST_CASE("canonical JSON round-trips and digests are stable") {
  const ScenarioConfig c = parse_scenario(R"({"schema": 1, "experiment": "joint_sweep", "seed": 9})");
  const ScenarioConfig back = parse_scenario(scenario_to_json(c));
  CHECK(scenario_to_json(back) == scenario_to_json(c));
  CHECK(config_digest(back) == config_digest(c));
  ScenarioConfig d = c;
  d.seed = 10;
  CHECK(config_digest(d) != config_digest(c));
  CHECK(hex_digest(0x1f).size() == 16);
}

TEST_CASE("mean and standard error") {
  auto [m, s] = mean_and_stderr({1.0, 2.0, 3.0, 4.0});
  CHECK(m == 2.5);
  // sample std sqrt(5/3), divided by 2
  CHECK(s == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  auto [m1, s1] = mean_and_stderr({7.0});
  CHECK(m1 == 7.0);
  CHECK(s1 == 0.0);
}

TEST_CASE("CSV emission is sorted and round-trips") {
  ExperimentResult r;
  r.seed = 42;
  r.cells.push_back({16, "odft", 0.25, 0.01, 10, {}});
  r.cells.push_back({8, "odft", 0.5, 0.02, 10, {}});
  r.cells.push_back({8, "dft", 1.0 / 3.0, 0.03, 10, {}});
  r.cells.push_back({16, "dft", std::numeric_limits<double>::infinity(), 0.0, 10, {}});
  const std::string text = csv_of(r);
  std::istringstream lines(text);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(header == "sweep,method,mean_nmse,stderr,trials,seed");
  CHECK(first.rfind("8,dft,", 0) == 0);
  std::istringstream in(text);
  const ExperimentResult back = parse_csv(in);
  REQUIRE(back.cells.size() == 4);
  CHECK(back.seed == 42);
  const ResultCell* c = back.find(8, "dft");
  REQUIRE(c != nullptr);
  CHECK(c->mean == 1.0 / 3.0);
  CHECK(std::isinf(back.find(16, "dft")->mean));
  CHECK(csv_of(back) == text);
}

TEST_CASE("single-antenna CDF is a step at one") {
  ScenarioConfig c = parse_scenario(
      R"({"schema": 1, "experiment": "sparsity_cdf", "n1": 1, "atoms": 1, "trials": 20,
          "dictionaries": [{"name": "dft", "kind": "dft"}]})");
  const ExperimentResult r = run_sparsity_cdf(c);
  CHECK(r.find(0, "dft")->mean == 0.0);
  CHECK(r.find(1, "dft")->mean == 1.0);
  CHECK(r.find(1, "dft")->trials == 20);
}

TEST_CASE("downlink sweep is deterministic and complete") {
  const ScenarioConfig c = parse_scenario(
      R"({"schema": 1, "experiment": "downlink_sweep", "n1": 8, "atoms": 16, "trials": 2,
          "grid": [4, 8], "dictionaries": [{"name": "dft", "kind": "dft"}, {"name": "odft", "kind": "odft"}]})");
  const ExperimentResult a = run_experiment(c);
  const ExperimentResult b = run_experiment(c);
  CHECK(csv_of(a) == csv_of(b));
  for (double t : {4.0, 8.0})
    for (const char* m : {"dft", "odft", "ls"}) {
      const ResultCell* cell = a.find(t, m);
      REQUIRE(cell != nullptr);
      CHECK(cell->trials == 2);
      CHECK(cell->mean >= 0.0);
    }
  CHECK(a.manifest.config_digest == hex_digest(config_digest(c)));
  CHECK(a.manifest.seed == c.seed);

  ScenarioConfig other = c;
  other.seed = 2;
  CHECK(csv_of(run_experiment(other)) != csv_of(a));
}

TEST_CASE("uplink sweep reports every method") {
  const ScenarioConfig c = parse_scenario(
      R"({"schema": 1, "experiment": "uplink_sweep", "n1": 8, "atoms": 16, "trials": 2, "users": 3,
          "uplink_symbols": 2, "ls_symbols": 3, "grid": [10], "pilot_kinds": ["designed", "random"],
          "dictionaries": [{"name": "odft", "kind": "odft"}]})");
  const ExperimentResult r = run_experiment(c);
  CHECK(r.find(10, "ls-orthogonal") != nullptr);
  CHECK(r.find(10, "sr-odft-designed") != nullptr);
  CHECK(r.find(10, "sr-odft-random") != nullptr);
}
