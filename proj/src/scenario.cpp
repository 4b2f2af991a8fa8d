#include "fddcs/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fddcs {

using nlohmann::json;

namespace {

json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

double read_number(const json& j, const std::string& key) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("scenario: field '" + key + "' must be a number or \"inf\"");
  }
  if (!j.is_number()) throw FormatError("scenario: field '" + key + "' must be a number");
  return j.get<double>();
}

Index read_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() && !j.is_number_unsigned())
    throw FormatError("scenario: field '" + key + "' must be an integer");
  return j.get<Index>();
}

std::uint64_t read_seed(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw FormatError("scenario: field '" + key + "' must be a non-negative integer");
  return j.get<std::uint64_t>();
}

std::string read_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw FormatError("scenario: field '" + key + "' must be a string");
  return j.get<std::string>();
}

bool read_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw FormatError("scenario: field '" + key + "' must be true or false");
  return j.get<bool>();
}

json dictionary_to_json(const DictionarySpec& d) {
  return json{{"name", d.name},
              {"kind", to_string(d.kind)},
              {"path", d.path},
              {"downlink_path", d.downlink_path},
              {"eta", d.eta},
              {"iterations", d.iterations},
              {"learning_snr_db", number_or_inf(d.learning_snr_db)}};
}

DictionarySpec dictionary_from_json(const json& j, std::size_t index) {
  const std::string where = "dictionaries[" + std::to_string(index) + "]";
  if (!j.is_object()) throw FormatError("scenario: " + where + " must be an object");
  DictionarySpec d;
  for (const auto& [key, v] : j.items()) {
    const std::string k = where + "." + key;
    if (key == "name") d.name = read_string(v, k);
    else if (key == "kind") {
      try {
        d.kind = dictionary_kind_from_string(read_string(v, k));
      } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("scenario: ") + e.what());
      }
    } else if (key == "path") d.path = read_string(v, k);
    else if (key == "downlink_path") d.downlink_path = read_string(v, k);
    else if (key == "eta") d.eta = read_number(v, k);
    else if (key == "iterations") d.iterations = static_cast<int>(read_count(v, k));
    else if (key == "learning_snr_db") d.learning_snr_db = read_number(v, k);
    else throw FormatError("scenario: unknown key '" + k + "'");
  }
  if (d.name.empty()) d.name = to_string(d.kind);
  return d;
}

DictionarySpec spec(const std::string& name, DictionaryKind kind) {
  DictionarySpec d;
  d.name = name;
  d.kind = kind;
  return d;
}

}  // namespace

std::string to_string(ExperimentFamily f) {
  switch (f) {
    case ExperimentFamily::sparsity_cdf: return "sparsity_cdf";
    case ExperimentFamily::downlink_sweep: return "downlink_sweep";
    case ExperimentFamily::uplink_sweep: return "uplink_sweep";
    case ExperimentFamily::joint_sweep: return "joint_sweep";
    case ExperimentFamily::noisy_learning_sweep: return "noisy_learning_sweep";
  }
  return "downlink_sweep";
}

ExperimentFamily experiment_family_from_string(const std::string& s) {
  for (auto f : {ExperimentFamily::sparsity_cdf, ExperimentFamily::downlink_sweep,
                 ExperimentFamily::uplink_sweep, ExperimentFamily::joint_sweep,
                 ExperimentFamily::noisy_learning_sweep})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown experiment family '" + s + "'");
}

std::string to_string(DictionaryKind k) {
  switch (k) {
    case DictionaryKind::dft: return "dft";
    case DictionaryKind::odft: return "odft";
    case DictionaryKind::file: return "file";
    case DictionaryKind::learn: return "learn";
    case DictionaryKind::joint_odft: return "joint_odft";
    case DictionaryKind::joint_file: return "joint_file";
    case DictionaryKind::joint_learn: return "joint_learn";
  }
  return "odft";
}

DictionaryKind dictionary_kind_from_string(const std::string& s) {
  for (auto k : {DictionaryKind::dft, DictionaryKind::odft, DictionaryKind::file,
                 DictionaryKind::learn, DictionaryKind::joint_odft, DictionaryKind::joint_file,
                 DictionaryKind::joint_learn})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown dictionary kind '" + s + "'");
}

bool is_joint(DictionaryKind k) {
  return k == DictionaryKind::joint_odft || k == DictionaryKind::joint_file ||
         k == DictionaryKind::joint_learn;
}

ScenarioConfig preset_config(const std::string& preset, ExperimentFamily family) {
  if (preset != "desk" && preset != "paper")
    throw std::invalid_argument("unknown preset '" + preset + "' (expected desk or paper)");
  const bool paper = preset == "paper";
  ScenarioConfig c;
  c.preset = preset;
  c.family = family;
  c.n1 = paper ? 100 : 32;
  c.atoms = paper ? 400 : 128;
  c.training = paper ? 10000 : 2000;
  c.trials = 200;
  const double n = static_cast<double>(c.n1);
  switch (family) {
    case ExperimentFamily::sparsity_cdf:
      c.trials = 1000;
      c.dictionaries = {spec("dft", DictionaryKind::dft), spec("odft", DictionaryKind::odft),
                        spec("learned", DictionaryKind::learn)};
      break;
    case ExperimentFamily::downlink_sweep:
      for (double f = 0.25; f <= 1.0 + 1e-12; f += 0.125) c.grid.push_back(std::round(f * n));
      c.dictionaries = {spec("dft", DictionaryKind::dft), spec("odft", DictionaryKind::odft),
                        spec("learned", DictionaryKind::learn)};
      break;
    case ExperimentFamily::uplink_sweep:
      c.grid = {0, 5, 10, 15, 20, 25, 30};
      c.dictionaries = {spec("odft", DictionaryKind::odft), spec("learned", DictionaryKind::learn)};
      break;
    case ExperimentFamily::joint_sweep:
      for (double f = 0.125; f <= 1.0 + 1e-12; f += 0.125) c.grid.push_back(std::round(f * n));
      c.reference_hz = 2010e6;
      c.dictionaries = {spec("learned", DictionaryKind::joint_learn),
                        spec("odft", DictionaryKind::joint_odft),
                        spec("learned", DictionaryKind::learn), spec("odft", DictionaryKind::odft)};
      break;
    case ExperimentFamily::noisy_learning_sweep:
      c.grid = {0, 10, 20, 30, std::numeric_limits<double>::infinity()};
      c.downlink_symbols = static_cast<Index>(std::round(0.375 * n));
      c.dictionaries = {spec("learned", DictionaryKind::learn)};
      break;
  }
  return c;
}

void validate_scenario(const ScenarioConfig& c) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("scenario: " + m); };
  if (c.schema != 1) fail("unsupported schema " + std::to_string(c.schema));
  if (c.trials < 1) fail("trials must be >= 1");
  if (c.n1 < 1 || c.n2 < 1) fail("array dimensions must be >= 1");
  if (!c.three_d && c.n2 != 1) fail("a 2D cell uses a ULA, n2 must be 1");
  if (c.ue_antennas < 1) fail("ue_antennas must be >= 1");
  if (c.atoms < c.n1 * c.n2) fail("atoms must be >= the number of antennas");
  if (c.training < 1) fail("training must be >= 1");
  if (!(c.frequency_hz > 0.0) || !(c.uplink_hz > 0.0) || !(c.downlink_hz > 0.0))
    fail("frequencies must be positive");
  if (c.reference_hz < 0.0) fail("reference_hz must be >= 0");
  if (c.recovery != "smv" && c.recovery != "mmv" && c.recovery != "both")
    fail("recovery must be smv, mmv or both");
  if (c.recovery != "smv" && c.ue_antennas < 2) fail("mmv recovery needs ue_antennas >= 2");
  if (c.family != ExperimentFamily::sparsity_cdf && c.grid.empty()) fail("grid must not be empty");
  if (c.dictionaries.empty()) fail("at least one dictionary is required");
  std::set<std::string> names;
  for (const DictionarySpec& d : c.dictionaries) {
    if (d.name.empty()) fail("dictionary without a name");
    const std::string key = (is_joint(d.kind) ? "joint:" : "single:") + d.name;
    if (!names.insert(key).second) fail("duplicate dictionary name '" + d.name + "'");
    if ((d.kind == DictionaryKind::file || d.kind == DictionaryKind::joint_file) && d.path.empty())
      fail("dictionary '" + d.name + "' needs a path");
    if (d.kind == DictionaryKind::joint_file && d.downlink_path.empty())
      fail("dictionary '" + d.name + "' needs a downlink_path");
    for (const std::string& p : {d.path, d.downlink_path})
      if ((d.kind == DictionaryKind::file || d.kind == DictionaryKind::joint_file) && !p.empty() &&
          !std::filesystem::exists(p))
        fail("dictionary file '" + p + "' does not exist");
    if (!(d.eta > 0.0)) fail("dictionary '" + d.name + "' needs eta > 0");
    if (d.iterations < 1) fail("dictionary '" + d.name + "' needs iterations >= 1");
    if (is_joint(d.kind) && c.family != ExperimentFamily::joint_sweep)
      fail("joint dictionary '" + d.name + "' only applies to joint_sweep");
    if (is_joint(d.kind) && c.three_d) fail("joint dictionaries need a ULA");
  }
  if (c.uncertainty.perturbed_gains < 0 || c.uncertainty.perturbed_spacings < 0 ||
      c.uncertainty.std_dev < 0.0 || !(c.uncertainty.clamp_high >= c.uncertainty.clamp_low))
    fail("invalid uncertainty settings");
  for (double g : c.grid)
    if (std::isnan(g)) fail("grid contains NaN");
  switch (c.family) {
    case ExperimentFamily::downlink_sweep:
    case ExperimentFamily::joint_sweep:
      for (double g : c.grid)
        if (g < 1.0 || g != std::floor(g)) fail("grid values are pilot lengths, integers >= 1");
      break;
    case ExperimentFamily::uplink_sweep:
      if (c.users < 1 || c.uplink_symbols < 1 || c.ls_symbols < 1) fail("uplink sizes must be >= 1");
      if (c.ls_symbols < c.users) fail("the LS baseline needs ls_symbols >= users");
      if (c.pilot_kinds.empty()) fail("pilot_kinds must not be empty");
      for (const std::string& k : c.pilot_kinds)
        if (k != "designed" && k != "orthogonal" && k != "random")
          fail("pilot kind '" + k + "' (expected designed, orthogonal or random)");
        else if (k == "orthogonal" && c.uplink_symbols < c.users)
          fail("orthogonal pilots need uplink_symbols >= users");
      if (c.three_d) fail("uplink_sweep uses the 2D cell");
      for (double g : c.grid)
        if (!std::isfinite(g)) fail("uplink SNR grid must be finite");
      break;
    case ExperimentFamily::noisy_learning_sweep:
      if (c.downlink_symbols < 1) fail("downlink_symbols must be >= 1");
      if (std::none_of(c.dictionaries.begin(), c.dictionaries.end(),
                       [](const DictionarySpec& d) { return d.kind == DictionaryKind::learn; }))
        fail("noisy_learning_sweep needs a 'learn' dictionary");
      break;
    case ExperimentFamily::sparsity_cdf:
      break;
  }
  if (c.family == ExperimentFamily::joint_sweep) {
    if (c.three_d) fail("joint_sweep uses the 2D cell");
    if (c.joint_uplink_symbols < 1) fail("joint_uplink_symbols must be >= 1");
  }
}

std::string scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["schema"] = c.schema;
  j["experiment"] = to_string(c.family);
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["environment_seed"] = c.environment_seed;
  j["three_d"] = c.three_d;
  j["n1"] = c.n1;
  j["n2"] = c.n2;
  j["ue_antennas"] = c.ue_antennas;
  j["frequency_hz"] = c.frequency_hz;
  j["uplink_hz"] = c.uplink_hz;
  j["downlink_hz"] = c.downlink_hz;
  j["reference_hz"] = c.reference_hz;
  j["atoms"] = c.atoms;
  j["training"] = c.training;
  j["trials"] = c.trials;
  json grid = json::array();
  for (double g : c.grid) grid.push_back(number_or_inf(g));
  j["grid"] = grid;
  json dicts = json::array();
  for (const DictionarySpec& d : c.dictionaries) dicts.push_back(dictionary_to_json(d));
  j["dictionaries"] = dicts;
  j["snr_db"] = c.snr_db;
  j["recovery"] = c.recovery;
  j["uncertainty"] = json{{"perturbed_gains", c.uncertainty.perturbed_gains},
                          {"perturbed_spacings", c.uncertainty.perturbed_spacings},
                          {"std_dev", c.uncertainty.std_dev},
                          {"clamp_low", c.uncertainty.clamp_low},
                          {"clamp_high", c.uncertainty.clamp_high}};
  j["uncertainty_seed"] = c.uncertainty_seed;
  j["users"] = c.users;
  j["uplink_symbols"] = c.uplink_symbols;
  j["ls_symbols"] = c.ls_symbols;
  j["pilot_kinds"] = c.pilot_kinds;
  j["separated_users"] = c.separated_users;
  j["joint_uplink_symbols"] = c.joint_uplink_symbols;
  j["downlink_symbols"] = c.downlink_symbols;
  return j.dump(2);
}

ScenarioConfig parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("scenario: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("scenario: top level must be an object");
  if (!j.contains("schema")) throw FormatError("scenario: missing 'schema' field");
  if (read_count(j["schema"], "schema") != 1)
    throw FormatError("scenario: unsupported schema " + j["schema"].dump());
  if (!j.contains("experiment")) throw FormatError("scenario: missing 'experiment' field");
  ExperimentFamily family;
  try {
    family = experiment_family_from_string(read_string(j["experiment"], "experiment"));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("scenario: ") + e.what());
  }
  const std::string preset = j.contains("preset") ? read_string(j["preset"], "preset") : "desk";
  ScenarioConfig c;
  try {
    c = preset_config(preset, family);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("scenario: ") + e.what());
  }
  // A 3D scenario switches the array defaults before explicit overrides apply.
  if (j.contains("three_d") && read_bool(j["three_d"], "three_d")) {
    c.three_d = true;
    c.n1 = preset == "paper" ? 8 : 4;
    c.n2 = c.n1;
    c.ue_antennas = 4;
    c.frequency_hz = 28e9;
    c.atoms = 4 * c.n1 * c.n2;
  }
  for (const auto& [key, v] : j.items()) {
    if (key == "schema" || key == "experiment" || key == "preset" || key == "three_d") continue;
    if (key == "seed") c.seed = read_seed(v, key);
    else if (key == "environment_seed") c.environment_seed = read_seed(v, key);
    else if (key == "n1") c.n1 = read_count(v, key);
    else if (key == "n2") c.n2 = read_count(v, key);
    else if (key == "ue_antennas") c.ue_antennas = read_count(v, key);
    else if (key == "frequency_hz") c.frequency_hz = read_number(v, key);
    else if (key == "uplink_hz") c.uplink_hz = read_number(v, key);
    else if (key == "downlink_hz") c.downlink_hz = read_number(v, key);
    else if (key == "reference_hz") c.reference_hz = read_number(v, key);
    else if (key == "atoms") c.atoms = read_count(v, key);
    else if (key == "training") c.training = read_count(v, key);
    else if (key == "trials") c.trials = read_count(v, key);
    else if (key == "grid") {
      if (!v.is_array()) throw FormatError("scenario: 'grid' must be an array");
      c.grid.clear();
      for (const json& g : v) c.grid.push_back(read_number(g, "grid"));
    } else if (key == "dictionaries") {
      if (!v.is_array()) throw FormatError("scenario: 'dictionaries' must be an array");
      c.dictionaries.clear();
      for (std::size_t i = 0; i < v.size(); ++i) c.dictionaries.push_back(dictionary_from_json(v[i], i));
    } else if (key == "snr_db") c.snr_db = read_number(v, key);
    else if (key == "recovery") c.recovery = read_string(v, key);
    else if (key == "uncertainty") {
      if (!v.is_object()) throw FormatError("scenario: 'uncertainty' must be an object");
      for (const auto& [uk, uv] : v.items()) {
        const std::string k = "uncertainty." + uk;
        if (uk == "perturbed_gains") c.uncertainty.perturbed_gains = read_count(uv, k);
        else if (uk == "perturbed_spacings") c.uncertainty.perturbed_spacings = read_count(uv, k);
        else if (uk == "std_dev") c.uncertainty.std_dev = read_number(uv, k);
        else if (uk == "clamp_low") c.uncertainty.clamp_low = read_number(uv, k);
        else if (uk == "clamp_high") c.uncertainty.clamp_high = read_number(uv, k);
        else throw FormatError("scenario: unknown key '" + k + "'");
      }
    } else if (key == "uncertainty_seed") c.uncertainty_seed = read_seed(v, key);
    else if (key == "users") c.users = read_count(v, key);
    else if (key == "uplink_symbols") c.uplink_symbols = read_count(v, key);
    else if (key == "ls_symbols") c.ls_symbols = read_count(v, key);
    else if (key == "pilot_kinds") {
      if (!v.is_array()) throw FormatError("scenario: 'pilot_kinds' must be an array");
      c.pilot_kinds.clear();
      for (const json& p : v) c.pilot_kinds.push_back(read_string(p, "pilot_kinds"));
    } else if (key == "separated_users") c.separated_users = read_bool(v, key);
    else if (key == "joint_uplink_symbols") c.joint_uplink_symbols = read_count(v, key);
    else if (key == "downlink_symbols") c.downlink_symbols = read_count(v, key);
    else throw FormatError("scenario: unknown key '" + key + "'");
  }
  try {
    validate_scenario(c);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::uint64_t config_digest(const ScenarioConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : scenario_to_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t d) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

double spacing_reference_hz(const ScenarioConfig& c) {
  if (c.reference_hz > 0.0) return c.reference_hz;
  if (c.family == ExperimentFamily::joint_sweep) return 0.5 * (c.uplink_hz + c.downlink_hz);
  return c.frequency_hz;
}

ArrayGeometry nominal_array(const ScenarioConfig& c) {
  const double d = half_wavelength_spacing(spacing_reference_hz(c));
  return c.three_d ? make_ura(c.n1, c.n2, d) : make_ula(c.n1, d);
}

ArrayGeometry deployed_array(const ScenarioConfig& c) {
  Rng rng = substream(c.uncertainty_seed, 0, 0xa77a1);
  return apply_array_uncertainty(nominal_array(c), c.uncertainty, rng);
}

CellConfig cell_config(const ScenarioConfig& c) { return c.three_d ? mmwave_cell() : microwave_cell(); }

}  // namespace fddcs
