#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fddcs/channel_model.hpp"
#include "fddcs/types.hpp"

// Scenario files are JSON objects with a mandatory `"schema": 1`. A preset
// ("desk" or "paper") fills every field first; keys present in the file then
// override it. Unknown keys are rejected so typos do not silently fall back to
// defaults. Infinite SNR values are written as the string "inf".

namespace fddcs {

enum class ExperimentFamily {
  sparsity_cdf,
  downlink_sweep,
  uplink_sweep,
  joint_sweep,
  noisy_learning_sweep,
};

std::string to_string(ExperimentFamily f);
ExperimentFamily experiment_family_from_string(const std::string& s);

enum class DictionaryKind {
  dft,          // square DFT (Kronecker variant on a URA)
  odft,         // overcomplete DFT
  file,         // DICT file at `path`
  learn,        // learned in process from simulated training channels
  joint_odft,   // uplink/downlink ODFT pair on a shared sin(theta) grid
  joint_file,   // DICT pair at `path` (uplink) and `downlink_path`
  joint_learn,  // jointly learned pair
};

std::string to_string(DictionaryKind k);
DictionaryKind dictionary_kind_from_string(const std::string& s);
bool is_joint(DictionaryKind k);

struct DictionarySpec {
  std::string name;
  DictionaryKind kind = DictionaryKind::odft;
  std::string path;
  std::string downlink_path;
  double eta = 0.1;
  int iterations = 30;
  double learning_snr_db = std::numeric_limits<double>::infinity();
};

struct ScenarioConfig {
  int schema = 1;
  ExperimentFamily family = ExperimentFamily::downlink_sweep;
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::uint64_t environment_seed = 7;
  bool three_d = false;  // 3D mmWave cell with a URA, else 2D microwave cell with a ULA
  Index n1 = 32;         // ULA size, or URA vertical elements
  Index n2 = 1;          // URA horizontal elements
  Index ue_antennas = 1;
  double frequency_hz = 2e9;
  double uplink_hz = 1920e6;
  double downlink_hz = 2110e6;
  double reference_hz = 0.0;  // spacing d = c / (2 f0); 0 picks the link (or band centre)
  Index atoms = 128;          // M; a URA uses 2x oversampling per axis instead
  Index training = 2000;      // L
  Index trials = 200;
  std::vector<double> grid;
  std::vector<DictionarySpec> dictionaries;
  double snr_db = 20.0;
  std::string recovery = "smv";  // smv, mmv or both
  UncertaintyConfig uncertainty;
  std::uint64_t uncertainty_seed = 11;
  // uplink sweep
  Index users = 6;
  Index uplink_symbols = 5;
  Index ls_symbols = 6;
  std::vector<std::string> pilot_kinds = {"designed"};
  bool separated_users = true;
  // joint and noisy-learning sweeps
  Index joint_uplink_symbols = 2;
  Index downlink_symbols = 12;
};

/// Preset defaults for a family: "desk" (N = 32, M = 128, L = 2000) or
/// "paper" (N = 100, M = 400, L = 10000).
ScenarioConfig preset_config(const std::string& preset, ExperimentFamily family);

/// Throws std::invalid_argument naming the offending field.
void validate_scenario(const ScenarioConfig& c);

/// Parses and validates; throws FormatError on malformed JSON or bad fields.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);

/// Canonical JSON (sorted keys, every field explicit).
std::string scenario_to_json(const ScenarioConfig& c);

/// FNV-1a 64 of the canonical JSON.
std::uint64_t config_digest(const ScenarioConfig& c);
std::string hex_digest(std::uint64_t d);

/// Base-station geometry after applying the configured array uncertainty.
ArrayGeometry deployed_array(const ScenarioConfig& c);
ArrayGeometry nominal_array(const ScenarioConfig& c);
CellConfig cell_config(const ScenarioConfig& c);
double spacing_reference_hz(const ScenarioConfig& c);

}  // namespace fddcs
