#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "fddcs/channel_model.hpp"
#include "fddcs/dictionary.hpp"
#include "fddcs/learning.hpp"
#include "fddcs/scenario.hpp"
#include "fddcs/types.hpp"

// Monte-Carlo experiment runner. Every random draw comes from a substream of
// the master seed keyed by (trial, purpose), and every method within a trial
// sees the same channel, pilots and noise, so orderings between methods are
// paired comparisons. Learned dictionaries are drawn from their own training
// stream, independent of the test channels.

namespace fddcs {

struct HarnessOptions {
  // When set, learned dictionaries are stored here keyed by everything that
  // determines them and reused on later runs.
  std::string cache_dir;
  std::ostream* log = nullptr;
};

struct ResultCell {
  double sweep = 0.0;
  std::string method;
  double mean = 0.0;  // mean NMSE, or the CDF value for sparsity experiments
  double stderr_value = 0.0;
  Index trials = 0;
  std::vector<double> samples;  // per-trial values (not serialized)
};

struct RunManifest {
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string timestamp;
  std::string experiment;
  std::string config_json;
};

struct ExperimentResult {
  ExperimentFamily family = ExperimentFamily::downlink_sweep;
  std::uint64_t seed = 0;
  std::vector<ResultCell> cells;
  // Sparsity experiments: per-dictionary l0 of every test channel.
  std::map<std::string, std::vector<double>> distributions;
  RunManifest manifest;

  const ResultCell* find(double sweep, const std::string& method) const;
  std::vector<double> sweeps() const;
  std::vector<std::string> methods() const;
  /// Sweep ascending, then method lexicographic.
  void sort();
};

/// A dictionary (or uplink/downlink pair) ready for use.
struct ResolvedDictionary {
  std::string name;
  DictionaryKind kind = DictionaryKind::odft;
  Dictionary dictionary;  // single-link, or the uplink member of a pair
  Dictionary downlink;    // pairs only
  std::vector<IterationDiagnostics> diagnostics;  // learned ones only
};

/// Training channels from the scenario's cell and deployed array, unit norm.
TrainingSet training_channels(const ScenarioConfig& c, double frequency_hz);
TrainingSet training_pairs(const ScenarioConfig& c);

/// Builds, loads or learns one dictionary. `frequency_hz` is the link that
/// single-link learning trains on.
ResolvedDictionary resolve_dictionary(const ScenarioConfig& c, const DictionarySpec& spec,
                                      double frequency_hz, const HarnessOptions& opts = {});

ExperimentResult run_sparsity_cdf(const ScenarioConfig& c, const HarnessOptions& opts = {});
ExperimentResult run_downlink_sweep(const ScenarioConfig& c, const HarnessOptions& opts = {});
ExperimentResult run_uplink_sweep(const ScenarioConfig& c, const HarnessOptions& opts = {});
ExperimentResult run_joint_sweep(const ScenarioConfig& c, const HarnessOptions& opts = {});
ExperimentResult run_noisy_learning_sweep(const ScenarioConfig& c, const HarnessOptions& opts = {});
/// Dispatches on c.family.
ExperimentResult run_experiment(const ScenarioConfig& c, const HarnessOptions& opts = {});

/// Header `sweep,method,mean_nmse,stderr,trials,seed`, rows in sorted order.
void emit_csv(const ExperimentResult& r, std::ostream& out);
void emit_csv(const ExperimentResult& r, const std::string& path);
/// Reads a table written by emit_csv (samples are not restored).
ExperimentResult parse_csv(std::istream& in);

void write_manifest(const ExperimentResult& r, const std::string& path);

/// Mean and standard error (sample standard deviation / sqrt(n)).
std::pair<double, double> mean_and_stderr(const std::vector<double>& v);

}  // namespace fddcs
