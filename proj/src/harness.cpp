#include "fddcs/harness.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fddcs/estimators.hpp"
#include "fddcs/matrix_io.hpp"
#include "fddcs/pilots.hpp"

namespace fddcs {

namespace {

// Substream purposes.
constexpr std::uint64_t kTrainSalt = 0x7a11;
constexpr std::uint64_t kTestSalt = 0x7e57;
constexpr std::uint64_t kPilotSalt = 0x9170;
constexpr std::uint64_t kNoiseSalt = 0x9015e;
constexpr std::uint64_t kDesignSalt = 0xde5;
constexpr std::uint64_t kCorruptSalt = 0xc0;
// Bump when learning changes so stale cached dictionaries are not reused.
constexpr int kCacheVersion = 1;

void log_line(const HarnessOptions& o, const std::string& msg) {
  if (o.log) *o.log << msg << std::endl;
}

std::string format_value(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t double_key(double x) { return std::bit_cast<std::uint64_t>(x); }

Index antenna_count(const ScenarioConfig& c) { return c.n1 * c.n2; }

Dictionary odft_for(const ScenarioConfig& c) {
  if (!c.three_d) return dft_overcomplete(c.n1, c.atoms);
  const double r = std::sqrt(static_cast<double>(c.atoms) / static_cast<double>(c.n1 * c.n2));
  const auto ri = static_cast<Index>(std::llround(r));
  if (ri < 1 || ri * ri * c.n1 * c.n2 != c.atoms)
    throw std::invalid_argument("URA dictionaries need atoms = r^2 * n1 * n2 for an integer r");
  return dft_overcomplete_ura(c.n1, ri * c.n1, c.n2, ri * c.n2);
}

std::string learning_key(const ScenarioConfig& c, const DictionarySpec& s, double frequency_hz) {
  std::ostringstream os;
  os << "v" << kCacheVersion << '|' << to_string(s.kind) << '|' << c.environment_seed << '|'
     << c.three_d << '|' << c.n1 << '|' << c.n2 << '|' << format_value(spacing_reference_hz(c))
     << '|' << c.uncertainty.perturbed_gains << '|' << c.uncertainty.perturbed_spacings << '|'
     << format_value(c.uncertainty.std_dev) << '|' << format_value(c.uncertainty.clamp_low) << '|'
     << format_value(c.uncertainty.clamp_high) << '|' << c.uncertainty_seed << '|'
     << format_value(frequency_hz) << '|' << format_value(c.uplink_hz) << '|'
     << format_value(c.downlink_hz) << '|' << c.training << '|' << c.seed << '|'
     << format_value(s.eta) << '|' << s.iterations << '|' << c.atoms << '|'
     << format_value(s.learning_snr_db);
  return hex_digest(fnv1a(os.str()));
}

std::string cache_path(const HarnessOptions& o, const std::string& key, const std::string& suffix) {
  return (std::filesystem::path(o.cache_dir) / ("learned-" + key + suffix + ".dict")).string();
}

void check_rows(const Dictionary& d, Index n, const std::string& name) {
  if (d.rows() != n)
    throw std::invalid_argument("dictionary '" + name + "' has " + std::to_string(d.rows()) +
                                " rows, the array has " + std::to_string(n) + " antennas");
}

CellEnvironment environment(const ScenarioConfig& c) {
  return generate_cell_environment(cell_config(c), c.environment_seed);
}

// Per-(sweep, method) sample collector.
class Table {
 public:
  void add(double sweep, const std::string& method, double v) { data_[{sweep, method}].push_back(v); }

  ExperimentResult finish(const ScenarioConfig& c) {
    ExperimentResult r;
    r.family = c.family;
    r.seed = c.seed;
    for (auto& [key, v] : data_) {
      ResultCell cell;
      cell.sweep = key.first;
      cell.method = key.second;
      const auto [m, se] = mean_and_stderr(v);
      cell.mean = m;
      cell.stderr_value = se;
      cell.trials = static_cast<Index>(v.size());
      cell.samples = std::move(v);
      r.cells.push_back(std::move(cell));
    }
    r.sort();
    r.manifest.seed = c.seed;
    r.manifest.config_digest = hex_digest(config_digest(c));
    r.manifest.experiment = to_string(c.family);
    r.manifest.config_json = scenario_to_json(c);
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    r.manifest.timestamp = buf;
    return r;
  }

 private:
  std::map<std::pair<double, std::string>, std::vector<double>> data_;
};

std::vector<ResolvedDictionary> resolve_all(const ScenarioConfig& c, double frequency_hz,
                                            const HarnessOptions& o) {
  std::vector<ResolvedDictionary> out;
  for (const DictionarySpec& s : c.dictionaries) out.push_back(resolve_dictionary(c, s, frequency_hz, o));
  return out;
}

Index max_grid(const ScenarioConfig& c) {
  return static_cast<Index>(*std::max_element(c.grid.begin(), c.grid.end()));
}

// Rows [0, t) of nested pilots and noise, so larger pilot budgets extend the
// smaller ones within a trial.
DownlinkObservation nested_observation(const DownlinkPilots& full, const CMatrix& noise,
                                       const CMatrix& h, Index t) {
  DownlinkObservation obs;
  obs.pilots.A = full.A.topRows(t);
  obs.pilots.rho = full.rho;
  obs.y = obs.pilots.A * h + noise.topRows(t);
  return obs;
}

double mean_user_nmse(const CMatrix& truth, const CMatrix& est) {
  double s = 0.0;
  for (Index k = 0; k < truth.cols(); ++k) s += nmse(truth.col(k), est.col(k));
  return s / static_cast<double>(truth.cols());
}

}  // namespace

std::pair<double, double> mean_and_stderr(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  if (v.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

const ResultCell* ExperimentResult::find(double sweep, const std::string& method) const {
  for (const ResultCell& c : cells)
    if (c.sweep == sweep && c.method == method) return &c;
  return nullptr;
}

std::vector<double> ExperimentResult::sweeps() const {
  std::set<double> s;
  for (const ResultCell& c : cells) s.insert(c.sweep);
  return {s.begin(), s.end()};
}

std::vector<std::string> ExperimentResult::methods() const {
  std::set<std::string> s;
  for (const ResultCell& c : cells) s.insert(c.method);
  return {s.begin(), s.end()};
}

void ExperimentResult::sort() {
  std::stable_sort(cells.begin(), cells.end(), [](const ResultCell& a, const ResultCell& b) {
    if (a.sweep != b.sweep) return a.sweep < b.sweep;
    return a.method < b.method;
  });
}

TrainingSet training_channels(const ScenarioConfig& c, double frequency_hz) {
  const CellEnvironment env = environment(c);
  const ArrayGeometry g = deployed_array(c);
  std::vector<CVector> v;
  v.reserve(static_cast<std::size_t>(c.training));
  for (Index i = 0; i < c.training; ++i) {
    Rng rng = substream(c.seed, static_cast<std::uint64_t>(i), kTrainSalt);
    v.push_back(draw_user_channel(env, g, frequency_hz, 1, rng).vector());
  }
  return make_training_set(std::move(v));
}

TrainingSet training_pairs(const ScenarioConfig& c) {
  const CellEnvironment env = environment(c);
  const ArrayGeometry g = deployed_array(c);
  std::vector<CVector> u, d;
  for (Index i = 0; i < c.training; ++i) {
    Rng rng = substream(c.seed, static_cast<std::uint64_t>(i), kTrainSalt);
    const UplinkDownlinkPair p = draw_ul_dl_pair(env, g, c.uplink_hz, c.downlink_hz, rng);
    u.push_back(p.uplink.vector());
    d.push_back(p.downlink.vector());
  }
  return make_paired_training_set(std::move(u), std::move(d));
}

ResolvedDictionary resolve_dictionary(const ScenarioConfig& c, const DictionarySpec& s,
                                      double frequency_hz, const HarnessOptions& o) {
  ResolvedDictionary r;
  r.name = s.name;
  r.kind = s.kind;
  const Index n = antenna_count(c);
  const double spacing = half_wavelength_spacing(spacing_reference_hz(c));
  switch (s.kind) {
    case DictionaryKind::dft:
      r.dictionary = c.three_d ? dft_square_ura(c.n1, c.n2) : dft_square(n);
      break;
    case DictionaryKind::odft:
      r.dictionary = odft_for(c);
      break;
    case DictionaryKind::file:
      r.dictionary = load_dictionary(s.path);
      break;
    case DictionaryKind::joint_odft: {
      auto p = joint_odft(n, c.atoms, spacing, kSpeedOfLight / c.uplink_hz,
                          kSpeedOfLight / c.downlink_hz);
      r.dictionary = std::move(p.first);
      r.downlink = std::move(p.second);
      break;
    }
    case DictionaryKind::joint_file:
      r.dictionary = load_dictionary(s.path);
      r.downlink = load_dictionary(s.downlink_path);
      if (r.dictionary.atoms() != r.downlink.atoms())
        throw std::invalid_argument("dictionary pair '" + s.name + "' has unequal atom counts");
      break;
    case DictionaryKind::learn:
    case DictionaryKind::joint_learn: {
      const bool joint = s.kind == DictionaryKind::joint_learn;
      const std::string key = learning_key(c, s, frequency_hz);
      const std::string first = cache_path(o, key, joint ? "-ul" : "");
      const std::string second = cache_path(o, key, "-dl");
      if (!o.cache_dir.empty() && std::filesystem::exists(first) &&
          (!joint || std::filesystem::exists(second))) {
        log_line(o, "loading cached dictionary '" + s.name + "' from " + first);
        r.dictionary = load_dictionary(first);
        if (joint) r.downlink = load_dictionary(second);
        break;
      }
      LearnConfig lc;
      lc.atom_count = c.atoms;
      lc.mismatch_tolerance = s.eta;
      lc.outer_iterations = s.iterations;
      lc.seed = c.seed;
      if (c.three_d) {
        lc.init = DictionaryInit::provided;
        lc.initial = odft_for(c).matrix;
      }
      log_line(o, "learning dictionary '" + s.name + "' (L = " + std::to_string(c.training) +
                      ", learning SNR " + format_value(s.learning_snr_db) + " dB)");
      LearnedModel m;
      if (joint) {
        TrainingSet t = training_pairs(c);
        if (std::isfinite(s.learning_snr_db)) {
          Rng rng = substream(c.seed, double_key(s.learning_snr_db), kCorruptSalt);
          t = corrupt_training_set(t, s.learning_snr_db, rng);
        }
        auto p = joint_odft(n, c.atoms, spacing, kSpeedOfLight / c.uplink_hz,
                            kSpeedOfLight / c.downlink_hz);
        LearnConfig lu = lc, ld = lc;
        lu.init = ld.init = DictionaryInit::provided;
        lu.initial = p.first.matrix;
        ld.initial = p.second.matrix;
        m = learn_joint(t, lu, ld);
        r.downlink = m.downlink;
      } else {
        TrainingSet t = training_channels(c, frequency_hz);
        if (std::isfinite(s.learning_snr_db)) {
          Rng rng = substream(c.seed, double_key(s.learning_snr_db), kCorruptSalt);
          t = corrupt_training_set(t, s.learning_snr_db, rng);
        }
        m = learn_dictionary(t, lc);
      }
      r.dictionary = m.dictionary;
      r.diagnostics = m.diagnostics;
      for (const IterationDiagnostics& d : m.diagnostics)
        log_line(o, "  iteration " + std::to_string(d.iteration) + ": mean l0 " +
                        format_value(d.mean_l0) + ", feasible " + format_value(d.feasible_fraction) +
                        ", replaced " + std::to_string(d.atoms_replaced));
      if (!o.cache_dir.empty()) {
        std::filesystem::create_directories(o.cache_dir);
        save_dictionary(first, r.dictionary);
        if (joint) save_dictionary(second, r.downlink);
      }
      break;
    }
  }
  check_rows(r.dictionary, n, s.name);
  if (is_joint(s.kind)) check_rows(r.downlink, n, s.name);
  r.dictionary.label = s.name;
  if (is_joint(s.kind)) r.downlink.label = s.name;
  return r;
}

ExperimentResult run_sparsity_cdf(const ScenarioConfig& c, const HarnessOptions& o) {
  validate_scenario(c);
  const std::vector<ResolvedDictionary> dicts = resolve_all(c, c.frequency_hz, o);
  const CellEnvironment env = environment(c);
  const ArrayGeometry g = deployed_array(c);
  const double eta = c.dictionaries.front().eta;
  std::vector<SparseSolver> solvers;
  for (const ResolvedDictionary& d : dicts) solvers.emplace_back(d.dictionary.matrix);
  SolverOptions so;
  so.epsilon = eta;

  std::map<std::string, std::vector<double>> l0;
  for (Index t = 0; t < c.trials; ++t) {
    Rng rng = substream(c.seed, static_cast<std::uint64_t>(t), kTestSalt);
    const CVector h = draw_user_channel(env, g, c.frequency_hz, 1, rng).vector().normalized();
    for (std::size_t k = 0; k < dicts.size(); ++k) {
      SolverOptions sk = so;
      sk.epsilon = c.dictionaries[k].eta;
      l0[dicts[k].name].push_back(static_cast<double>(solvers[k].solve(h, sk).l0()));
    }
  }
  double top = 0.0;
  for (const auto& [name, v] : l0) top = std::max(top, *std::max_element(v.begin(), v.end()));
  Table table;
  ExperimentResult r = table.finish(c);
  for (const auto& [name, v] : l0) {
    const double n = static_cast<double>(v.size());
    for (Index k = 0; k <= static_cast<Index>(top); ++k) {
      const double p = static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) {
                         return x <= static_cast<double>(k);
                       })) / n;
      ResultCell cell;
      cell.sweep = static_cast<double>(k);
      cell.method = name;
      cell.mean = p;
      cell.stderr_value = std::sqrt(p * (1.0 - p) / n);
      cell.trials = static_cast<Index>(v.size());
      r.cells.push_back(std::move(cell));
    }
  }
  r.distributions = std::move(l0);
  r.sort();
  return r;
}

ExperimentResult run_downlink_sweep(const ScenarioConfig& c, const HarnessOptions& o) {
  validate_scenario(c);
  const std::vector<ResolvedDictionary> dicts = resolve_all(c, c.frequency_hz, o);
  const CellEnvironment env = environment(c);
  const ArrayGeometry g = deployed_array(c);
  const Index n = g.size();
  const Index tmax = max_grid(c);
  const double rho = db_to_linear(c.snr_db);
  std::vector<RecoveryMode> modes;
  if (c.recovery != "mmv") modes.push_back(RecoveryMode::smv);
  if (c.recovery != "smv") modes.push_back(RecoveryMode::mmv);
  const bool both = modes.size() == 2;

  Table table;
  for (Index t = 0; t < c.trials; ++t) {
    Rng rng = substream(c.seed, static_cast<std::uint64_t>(t), kTestSalt);
    const CMatrix h = draw_user_channel(env, g, c.frequency_hz, c.ue_antennas, rng).h;
    Rng prng = substream(c.seed, static_cast<std::uint64_t>(t), kPilotSalt);
    const DownlinkPilots full = downlink_pilots(tmax, n, rho, prng);
    const CMatrix noise = complex_gaussian_matrix(tmax, h.cols(), prng);
    // LS reference with T_d = N.
    const DownlinkPilots ref = downlink_pilots(n, n, rho, prng);
    const CMatrix ref_noise = complex_gaussian_matrix(n, h.cols(), prng);
    const double ls = nmse(h, downlink_ls(nested_observation(ref, ref_noise, h, n)).estimate);
    for (double gv : c.grid) {
      const DownlinkObservation obs = nested_observation(full, noise, h, static_cast<Index>(gv));
      table.add(gv, "ls", ls);
      for (const ResolvedDictionary& d : dicts)
        for (RecoveryMode m : modes) {
          const std::string label =
              both ? d.name + (m == RecoveryMode::mmv ? "-mmv" : "-smv") : d.name;
          table.add(gv, label, nmse(h, downlink_cs(obs, d.dictionary, {}, m).estimate));
        }
    }
    if ((t + 1) % 50 == 0) log_line(o, "trial " + std::to_string(t + 1) + "/" + std::to_string(c.trials));
  }
  return table.finish(c);
}

ExperimentResult run_uplink_sweep(const ScenarioConfig& c, const HarnessOptions& o) {
  validate_scenario(c);
  const std::vector<ResolvedDictionary> dicts = resolve_all(c, c.frequency_hz, o);
  const CellEnvironment env = environment(c);
  const ArrayGeometry g = deployed_array(c);
  const Index k = c.users;
  const Index tu = c.uplink_symbols;

  PilotMatrix designed;
  if (std::find(c.pilot_kinds.begin(), c.pilot_kinds.end(), "designed") != c.pilot_kinds.end()) {
    Rng drng = substream(c.seed, 0, kDesignSalt);
    designed = design_low_coherence(k, tu, PilotDesignOptions{}, drng);
    log_line(o, "designed pilots: coherence " + format_value(pilot_coherence(designed)) +
                    ", Welch bound " + format_value(tu < k ? welch_bound(k, tu) : 0.0));
  }
  const CellConfig cell = cell_config(c);
  const double width = (cell.azimuth_max - cell.azimuth_min) / static_cast<double>(k);

  Table table;
  for (Index t = 0; t < c.trials; ++t) {
    Rng rng = substream(c.seed, static_cast<std::uint64_t>(t), kTestSalt);
    CMatrix h(g.size(), k);
    for (Index u = 0; u < k; ++u) {
      std::optional<UserPlacement> place;
      if (c.separated_users)
        place = UserPlacement{cell.azimuth_min + static_cast<double>(u) * width,
                              cell.azimuth_min + static_cast<double>(u + 1) * width};
      h.col(u) = draw_user_channel(env, g, c.frequency_hz, 1, rng, place).vector();
    }
    Rng prng = substream(c.seed, static_cast<std::uint64_t>(t), kPilotSalt);
    const PilotMatrix random_shape = random_pilots(k, tu, prng);
    for (std::size_t gi = 0; gi < c.grid.size(); ++gi) {
      const double rho = db_to_linear(c.grid[gi]);
      Rng nrng = substream(c.seed, static_cast<std::uint64_t>(t), kNoiseSalt + gi);
      const CMatrix w_ls = complex_gaussian_matrix(g.size(), c.ls_symbols, nrng);
      const CMatrix w = complex_gaussian_matrix(g.size(), tu, nrng);

      const PilotMatrix ls_pilots = orthogonal_pilots(k, c.ls_symbols, rho);
      UplinkObservation ls_obs;
      ls_obs.pilots = ls_pilots;
      ls_obs.y = h * ls_pilots.C() * ls_pilots.S + w_ls;
      table.add(c.grid[gi], "ls-orthogonal", mean_user_nmse(h, uplink_ls(ls_obs).estimate));

      for (const std::string& kind : c.pilot_kinds) {
        PilotMatrix p = kind == "designed" ? designed
                        : kind == "random" ? random_shape
                                           : orthogonal_pilots(k, tu, rho);
        p.power = RVector::Constant(k, rho * static_cast<double>(tu));
        UplinkObservation obs;
        obs.pilots = p;
        obs.y = h * p.C() * p.S + w;
        for (const ResolvedDictionary& d : dicts)
          table.add(c.grid[gi], "sr-" + d.name + "-" + kind,
                    mean_user_nmse(h, uplink_sr(obs, d.dictionary).estimate));
      }
    }
    if ((t + 1) % 20 == 0) log_line(o, "trial " + std::to_string(t + 1) + "/" + std::to_string(c.trials));
  }
  return table.finish(c);
}

ExperimentResult run_joint_sweep(const ScenarioConfig& c, const HarnessOptions& o) {
  validate_scenario(c);
  // Single-link dictionaries serve the downlink, so they learn on it.
  const std::vector<ResolvedDictionary> dicts = resolve_all(c, c.downlink_hz, o);
  const CellEnvironment env = environment(c);
  const ArrayGeometry g = deployed_array(c);
  const Index n = g.size();
  const Index tmax = max_grid(c);
  const double rho = db_to_linear(c.snr_db);
  const PilotMatrix up = orthogonal_pilots(1, c.joint_uplink_symbols, rho);

  Table table;
  for (Index t = 0; t < c.trials; ++t) {
    Rng rng = substream(c.seed, static_cast<std::uint64_t>(t), kTestSalt);
    const UplinkDownlinkPair pair = draw_ul_dl_pair(env, g, c.uplink_hz, c.downlink_hz, rng);
    const CMatrix& hd = pair.downlink.h;
    Rng prng = substream(c.seed, static_cast<std::uint64_t>(t), kPilotSalt);
    const DownlinkPilots full = downlink_pilots(tmax, n, rho, prng);
    const CMatrix noise = complex_gaussian_matrix(tmax, 1, prng);
    const UplinkObservation ul = simulate_uplink(pair.uplink.h, up, prng);
    for (double gv : c.grid) {
      const DownlinkObservation dl = nested_observation(full, noise, hd, static_cast<Index>(gv));
      for (const ResolvedDictionary& d : dicts) {
        if (is_joint(d.kind)) {
          const JointReport jr = joint_estimate(ul, dl, d.dictionary, d.downlink);
          table.add(gv, "joint-" + d.name, nmse(hd, jr.downlink));
        } else {
          table.add(gv, "independent-" + d.name, nmse(hd, downlink_cs(dl, d.dictionary).estimate));
        }
      }
    }
    if ((t + 1) % 50 == 0) log_line(o, "trial " + std::to_string(t + 1) + "/" + std::to_string(c.trials));
  }
  return table.finish(c);
}

ExperimentResult run_noisy_learning_sweep(const ScenarioConfig& c, const HarnessOptions& o) {
  validate_scenario(c);
  const DictionarySpec base = *std::find_if(
      c.dictionaries.begin(), c.dictionaries.end(),
      [](const DictionarySpec& d) { return d.kind == DictionaryKind::learn; });
  std::vector<Dictionary> learned;
  for (double snr : c.grid) {
    DictionarySpec s = base;
    s.learning_snr_db = snr;
    learned.push_back(resolve_dictionary(c, s, c.frequency_hz, o).dictionary);
  }
  Dictionary reference;
  const auto inf = std::find_if(c.grid.begin(), c.grid.end(), [](double v) { return std::isinf(v) && v > 0; });
  if (inf != c.grid.end()) {
    reference = learned[static_cast<std::size_t>(inf - c.grid.begin())];
  } else {
    DictionarySpec clean = base;
    clean.learning_snr_db = kNoiselessSnr;
    reference = resolve_dictionary(c, clean, c.frequency_hz, o).dictionary;
  }

  const CellEnvironment env = environment(c);
  const ArrayGeometry g = deployed_array(c);
  const Index td = c.downlink_symbols;
  const double rho = db_to_linear(c.snr_db);
  Table table;
  for (Index t = 0; t < c.trials; ++t) {
    Rng rng = substream(c.seed, static_cast<std::uint64_t>(t), kTestSalt);
    const CMatrix h = draw_user_channel(env, g, c.frequency_hz, c.ue_antennas, rng).h;
    Rng prng = substream(c.seed, static_cast<std::uint64_t>(t), kPilotSalt);
    const DownlinkPilots p = downlink_pilots(td, g.size(), rho, prng);
    const CMatrix noise = complex_gaussian_matrix(td, h.cols(), prng);
    const DownlinkObservation obs = nested_observation(p, noise, h, td);
    const double ref = nmse(h, downlink_cs(obs, reference).estimate);
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      table.add(c.grid[i], base.name, nmse(h, downlink_cs(obs, learned[i]).estimate));
      table.add(c.grid[i], base.name + "-noiseless", ref);
    }
    if ((t + 1) % 50 == 0) log_line(o, "trial " + std::to_string(t + 1) + "/" + std::to_string(c.trials));
  }
  return table.finish(c);
}

ExperimentResult run_experiment(const ScenarioConfig& c, const HarnessOptions& o) {
  switch (c.family) {
    case ExperimentFamily::sparsity_cdf: return run_sparsity_cdf(c, o);
    case ExperimentFamily::downlink_sweep: return run_downlink_sweep(c, o);
    case ExperimentFamily::uplink_sweep: return run_uplink_sweep(c, o);
    case ExperimentFamily::joint_sweep: return run_joint_sweep(c, o);
    case ExperimentFamily::noisy_learning_sweep: return run_noisy_learning_sweep(c, o);
  }
  throw std::invalid_argument("unknown experiment family");
}

void emit_csv(const ExperimentResult& r, std::ostream& out) {
  ExperimentResult sorted = r;
  sorted.sort();
  out << "sweep,method,mean_nmse,stderr,trials,seed\n";
  for (const ResultCell& c : sorted.cells)
    out << format_value(c.sweep) << ',' << c.method << ',' << format_value(c.mean) << ','
        << format_value(c.stderr_value) << ',' << c.trials << ',' << r.seed << '\n';
}

void emit_csv(const ExperimentResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  emit_csv(r, out);
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

ExperimentResult parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "sweep,method,mean_nmse,stderr,trials,seed")
    throw FormatError("results CSV: unexpected header");
  ExperimentResult r;
  Index row = 0;
  auto number = [&](const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty())
      throw FormatError("results CSV: row " + std::to_string(row) + ": bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 6) throw FormatError("results CSV: row " + std::to_string(row) + " needs 6 fields");
    ResultCell c;
    c.sweep = number(f[0]);
    c.method = f[1];
    c.mean = number(f[2]);
    c.stderr_value = number(f[3]);
    c.trials = static_cast<Index>(number(f[4]));
    r.seed = static_cast<std::uint64_t>(std::stoull(f[5]));
    r.cells.push_back(std::move(c));
  }
  return r;
}

void write_manifest(const ExperimentResult& r, const std::string& path) {
  nlohmann::json j;
  j["schema"] = 1;
  j["experiment"] = r.manifest.experiment;
  j["seed"] = r.manifest.seed;
  j["config_digest"] = r.manifest.config_digest;
  j["timestamp"] = r.manifest.timestamp;
  j["config"] = nlohmann::json::parse(r.manifest.config_json.empty() ? "{}" : r.manifest.config_json);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace fddcs
