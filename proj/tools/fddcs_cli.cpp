#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fddcs/channel_model.hpp"
#include "fddcs/dictionary.hpp"
#include "fddcs/estimators.hpp"
#include "fddcs/harness.hpp"
#include "fddcs/learning.hpp"
#include "fddcs/matrix_io.hpp"
#include "fddcs/pilots.hpp"
#include "fddcs/scenario.hpp"

using namespace fddcs;

namespace {

std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double to_db(double x) { return 10.0 * std::log10(x); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

// Geometry flags shared by gen-env and gen-channels. A scenario file, when
// given, supplies the defaults.
struct GeometryArgs {
  std::string scenario;
  bool three_d = false;
  Index n1 = 32;
  Index n2 = 1;
  std::uint64_t env_seed = 7;

  void add(CLI::App* app) {
    app->add_option("--scenario", scenario, "scenario JSON supplying geometry defaults");
    app->add_flag("--3d", three_d, "3D mmWave cell with a URA");
    app->add_option("--n1", n1, "ULA size or URA vertical elements");
    app->add_option("--n2", n2, "URA horizontal elements");
    app->add_option("--env-seed", env_seed, "cell environment seed");
  }

  ScenarioConfig config(const CLI::App* app) const {
    ScenarioConfig c = scenario.empty() ? preset_config("desk", ExperimentFamily::downlink_sweep)
                                        : load_scenario(scenario);
    if (app->count("--3d")) c.three_d = three_d;
    if (app->count("--n1")) c.n1 = n1;
    if (app->count("--n2")) c.n2 = n2;
    if (app->count("--env-seed")) c.environment_seed = env_seed;
    if (c.three_d && !app->count("--n2") && scenario.empty()) c.n2 = c.n1 = 4;
    return c;
  }
};

void write_diagnostics(const std::string& path, const std::vector<IterationDiagnostics>& diag) {
  std::ofstream out = open_out(path);
  out << "iteration,mean_l0,mean_residual,atoms_replaced\n";
  for (const IterationDiagnostics& d : diag)
    out << d.iteration << ',' << num(d.mean_l0) << ',' << num(d.mean_residual) << ','
        << d.atoms_replaced << '\n';
}

std::vector<CVector> first_columns(const std::vector<CMatrix>& v) {
  std::vector<CVector> out;
  for (const CMatrix& m : v) out.push_back(m.col(0));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FDD massive MIMO channel simulator: dictionaries, pilots and sparse estimation"};
  app.require_subcommand(1);

  // gen-env
  auto* env_cmd = app.add_subcommand("gen-env", "Write the scattering environment of a cell as JSON");
  GeometryArgs env_geo;
  env_geo.add(env_cmd);
  std::string env_out = "-";
  env_cmd->add_option("-o,--out", env_out, "output path (- for stdout)");

  // gen-channels
  auto* ch_cmd = app.add_subcommand("gen-channels", "Draw user channels into a CHSET file");
  GeometryArgs ch_geo;
  ch_geo.add(ch_cmd);
  Index ch_count = 100;
  std::uint64_t ch_seed = 1;
  double ch_freq = 0.0, ch_ul = 0.0, ch_dl = 0.0;
  Index ch_ue = 0;
  bool ch_paired = false;
  std::string ch_out;
  ch_cmd->add_option("-n,--count", ch_count, "number of channels (pairs when --paired)");
  ch_cmd->add_option("--seed", ch_seed, "draw seed");
  ch_cmd->add_option("--frequency-hz", ch_freq, "carrier frequency");
  ch_cmd->add_flag("--paired", ch_paired, "draw uplink/downlink pairs");
  ch_cmd->add_option("--uplink-hz", ch_ul, "uplink carrier for pairs");
  ch_cmd->add_option("--downlink-hz", ch_dl, "downlink carrier for pairs");
  ch_cmd->add_option("--ue-antennas", ch_ue, "UE antennas");
  ch_cmd->add_option("-o,--out", ch_out, "CHSET output")->required();

  // learn-dict
  auto* ld_cmd = app.add_subcommand("learn-dict", "Learn a dictionary from a CHSET file");
  std::string ld_in, ld_out, ld_diag;
  LearnConfig ld_cfg;
  std::string ld_init = "odft";
  double ld_snr = kNoiselessSnr;
  ld_cmd->add_option("-i,--channels", ld_in, "CHSET input")->required()->check(CLI::ExistingFile);
  ld_cmd->add_option("-o,--out", ld_out, "DICT output")->required();
  ld_cmd->add_option("--diagnostics", ld_diag, "per-iteration diagnostics CSV");
  ld_cmd->add_option("--atoms", ld_cfg.atom_count, "dictionary size M");
  ld_cmd->add_option("--eta", ld_cfg.mismatch_tolerance, "mismatch tolerance on unit-norm channels");
  ld_cmd->add_option("--iterations", ld_cfg.outer_iterations, "outer iterations");
  ld_cmd->add_option("--init", ld_init, "odft or random")->check(CLI::IsMember({"odft", "random"}));
  ld_cmd->add_option("--seed", ld_cfg.seed, "seed for initialization and replacements");
  ld_cmd->add_option("--learning-snr-db", ld_snr, "corrupt training channels at this SNR");

  // learn-joint
  auto* lj_cmd = app.add_subcommand("learn-joint", "Learn an uplink/downlink dictionary pair");
  std::string lj_in, lj_ul, lj_dl, lj_diag;
  LearnConfig lj_cfg;
  double lj_ref = 0.0;
  lj_cmd->add_option("-i,--channels", lj_in, "paired CHSET input")->required()->check(CLI::ExistingFile);
  lj_cmd->add_option("--out-ul", lj_ul, "uplink DICT output")->required();
  lj_cmd->add_option("--out-dl", lj_dl, "downlink DICT output")->required();
  lj_cmd->add_option("--diagnostics", lj_diag, "per-iteration diagnostics CSV");
  lj_cmd->add_option("--atoms", lj_cfg.atom_count, "atoms per link");
  lj_cmd->add_option("--eta", lj_cfg.mismatch_tolerance, "per-link mismatch tolerance");
  lj_cmd->add_option("--iterations", lj_cfg.outer_iterations, "outer iterations");
  lj_cmd->add_option("--seed", lj_cfg.seed, "seed");
  lj_cmd->add_option("--reference-hz", lj_ref, "spacing reference frequency (default band centre)");

  // design-pilots
  auto* dp_cmd = app.add_subcommand("design-pilots", "Design low-coherence uplink pilots");
  Index dp_k = 6, dp_t = 5;
  PilotDesignOptions dp_opts;
  std::uint64_t dp_seed = 1;
  double dp_rho = 1.0;
  std::string dp_out;
  dp_cmd->add_option("--users", dp_k, "K")->required();
  dp_cmd->add_option("--symbols", dp_t, "T")->required();
  dp_cmd->add_option("--gamma", dp_opts.gamma, "shrink factor");
  dp_cmd->add_option("--top-percent", dp_opts.shrink_percent, "percentage of Gram entries shrunk");
  dp_cmd->add_option("--iters", dp_opts.iterations, "iterations");
  dp_cmd->add_option("--seed", dp_seed, "seed");
  dp_cmd->add_option("--rho", dp_rho, "per-symbol power");
  dp_cmd->add_option("-o,--out", dp_out, "PILOT output")->required();

  // estimate
  auto* es_cmd = app.add_subcommand("estimate", "Estimate channels from a CHSET file and report NMSE");
  std::string es_ch, es_dict, es_dict_dl, es_pilots, es_est = "cs", es_mode = "smv", es_out;
  Index es_td = 12, es_tu = 2;
  double es_snr = 20.0;
  std::uint64_t es_seed = 1;
  es_cmd->add_option("-i,--channels", es_ch, "CHSET input")->required()->check(CLI::ExistingFile);
  es_cmd->add_option("--dict", es_dict, "DICT (uplink member for joint)");
  es_cmd->add_option("--dict-dl", es_dict_dl, "downlink DICT for joint");
  es_cmd->add_option("--pilots", es_pilots, "PILOT file for sr");
  es_cmd->add_option("--estimator", es_est, "ls, cs, sr or joint")
      ->check(CLI::IsMember({"ls", "cs", "sr", "joint"}));
  es_cmd->add_option("--td", es_td, "downlink pilot symbols");
  es_cmd->add_option("--tu", es_tu, "uplink pilot symbols for joint");
  es_cmd->add_option("--snr-db", es_snr, "SNR in dB");
  es_cmd->add_option("--mode", es_mode, "smv or mmv")->check(CLI::IsMember({"smv", "mmv"}));
  es_cmd->add_option("--seed", es_seed, "pilot and noise seed");
  es_cmd->add_option("-o,--out", es_out, "per-trial CSV (aggregate goes to stdout)");

  // experiment
  auto* ex_cmd = app.add_subcommand("experiment", "Run a scenario file");
  std::string ex_scenario, ex_out, ex_manifest, ex_cache;
  bool ex_quiet = false;
  ex_cmd->add_option("scenario", ex_scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  ex_cmd->add_option("-o,--out", ex_out, "results CSV")->required();
  ex_cmd->add_option("--manifest", ex_manifest, "manifest JSON (default <out>.manifest.json)");
  ex_cmd->add_option("--cache-dir", ex_cache, "reuse learned dictionaries from here");
  ex_cmd->add_flag("-q,--quiet", ex_quiet, "no progress output");

  // coherence
  auto* co_cmd = app.add_subcommand("coherence", "Mutual coherence of a dictionary, pilots or both");
  std::string co_dict, co_pilots;
  co_cmd->add_option("--dict", co_dict, "DICT file")->check(CLI::ExistingFile);
  co_cmd->add_option("--pilots", co_pilots, "PILOT file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*env_cmd) {
      const ScenarioConfig c = env_geo.config(env_cmd);
      const CellEnvironment env = generate_cell_environment(cell_config(c), c.environment_seed);
      nlohmann::json j;
      j["seed"] = env.seed;
      j["three_d"] = env.config.three_d;
      j["cell_radius"] = env.config.cell_radius;
      j["clusters"] = nlohmann::json::array();
      for (std::size_t i = 0; i < env.fixed_clusters.size(); ++i) {
        const ScatteringCluster& s = env.fixed_clusters[i];
        j["clusters"].push_back({{"id", i}, {"x", s.x}, {"y", s.y}, {"height", s.height},
                                 {"azimuth_spread", s.azimuth_spread},
                                 {"zenith_spread", s.zenith_spread},
                                 {"subpaths", s.subpath_count}});
      }
      if (env_out == "-") {
        std::cout << j.dump(2) << '\n';
      } else {
        open_out(env_out) << j.dump(2) << '\n';
      }
    } else if (*ch_cmd) {
      const ScenarioConfig c = ch_geo.config(ch_cmd);
      const CellEnvironment env = generate_cell_environment(cell_config(c), c.environment_seed);
      const ArrayGeometry g = deployed_array(c);
      const Index ue = ch_ue > 0 ? ch_ue : c.ue_antennas;
      ChannelSet set;
      set.antennas = g.size();
      set.ue_antennas = ue;
      if (ch_paired) {
        set.frequency_hz = ch_ul > 0 ? ch_ul : c.uplink_hz;
        set.downlink_hz = ch_dl > 0 ? ch_dl : c.downlink_hz;
      } else {
        set.frequency_hz = ch_freq > 0 ? ch_freq : c.frequency_hz;
      }
      for (Index i = 0; i < ch_count; ++i) {
        Rng rng = substream(ch_seed, static_cast<std::uint64_t>(i), 0x6e);
        if (ch_paired) {
          if (ue != 1) throw std::invalid_argument("paired channels need a single-antenna UE");
          const UplinkDownlinkPair p = draw_ul_dl_pair(env, g, set.frequency_hz, set.downlink_hz, rng);
          set.channels.push_back(p.uplink.h);
          set.downlink.push_back(p.downlink.h);
        } else {
          set.channels.push_back(draw_user_channel(env, g, set.frequency_hz, ue, rng).h);
        }
      }
      save_channel_set(ch_out, set);
    } else if (*ld_cmd) {
      const ChannelSet set = load_channel_set(ld_in);
      TrainingSet t = make_training_set(first_columns(set.channels));
      if (std::isfinite(ld_snr)) {
        Rng rng = substream(ld_cfg.seed, 0, 0xc0);
        t = corrupt_training_set(t, ld_snr, rng);
      }
      ld_cfg.init = ld_init == "random" ? DictionaryInit::random : DictionaryInit::odft;
      const LearnedModel m = learn_dictionary(t, ld_cfg);
      save_dictionary(ld_out, m.dictionary);
      if (!ld_diag.empty()) write_diagnostics(ld_diag, m.diagnostics);
      std::cerr << "best iteration " << m.best_iteration << ", mean l0 "
                << num(m.diagnostics[static_cast<std::size_t>(m.best_iteration - 1)].mean_l0)
                << (m.feasible ? "" : " (feasibility target not met)") << '\n';
    } else if (*lj_cmd) {
      const ChannelSet set = load_channel_set(lj_in);
      if (!set.paired()) throw std::invalid_argument("learn-joint needs a paired CHSET file");
      const TrainingSet t =
          make_paired_training_set(first_columns(set.channels), first_columns(set.downlink));
      const double ref = lj_ref > 0 ? lj_ref : 0.5 * (set.frequency_hz + set.downlink_hz);
      auto init = joint_odft(set.antennas, lj_cfg.atom_count, half_wavelength_spacing(ref),
                             kSpeedOfLight / set.frequency_hz, kSpeedOfLight / set.downlink_hz);
      LearnConfig lu = lj_cfg, ld = lj_cfg;
      lu.init = ld.init = DictionaryInit::provided;
      lu.initial = init.first.matrix;
      ld.initial = init.second.matrix;
      const LearnedModel m = learn_joint(t, lu, ld);
      save_dictionary(lj_ul, m.dictionary);
      save_dictionary(lj_dl, m.downlink);
      if (!lj_diag.empty()) write_diagnostics(lj_diag, m.diagnostics);
    } else if (*dp_cmd) {
      Rng rng = substream(dp_seed, 0, 0xde5);
      const PilotMatrix p = design_low_coherence(dp_k, dp_t, dp_opts, rng, dp_rho);
      save_pilots(dp_out, p);
      std::cout << "coherence " << num(pilot_coherence(p)) << '\n';
      std::cout << "welch_bound " << num(dp_t < dp_k ? welch_bound(dp_k, dp_t) : 0.0) << '\n';
    } else if (*es_cmd) {
      const ChannelSet set = load_channel_set(es_ch);
      const double rho = db_to_linear(es_snr);
      const RecoveryMode mode = es_mode == "mmv" ? RecoveryMode::mmv : RecoveryMode::smv;
      std::vector<double> values;
      if (es_est == "sr") {
        if (es_dict.empty() || es_pilots.empty())
          throw std::invalid_argument("sr needs --dict and --pilots");
        const Dictionary d = load_dictionary(es_dict);
        PilotMatrix p = load_pilots(es_pilots);
        p.power = RVector::Constant(p.users(), rho * static_cast<double>(p.symbols()));
        const Index k = p.users();
        // Consecutive groups of K channels form one multi-user trial.
        for (std::size_t first = 0; first + static_cast<std::size_t>(k) <= set.size(); first += k) {
          CMatrix h(set.antennas, k);
          for (Index u = 0; u < k; ++u) h.col(u) = set.channels[first + static_cast<std::size_t>(u)].col(0);
          Rng rng = substream(es_seed, first / static_cast<std::size_t>(k), 0x5e);
          const UplinkObservation obs = simulate_uplink(h, p, rng);
          const CMatrix est = uplink_sr(obs, d).estimate;
          double s = 0.0;
          for (Index u = 0; u < k; ++u) s += nmse(h.col(u), est.col(u));
          values.push_back(s / static_cast<double>(k));
        }
      } else {
        Dictionary d, dd;
        if (es_est != "ls") {
          if (es_dict.empty()) throw std::invalid_argument(es_est + " needs --dict");
          d = load_dictionary(es_dict);
        }
        if (es_est == "joint") {
          if (!set.paired()) throw std::invalid_argument("joint needs a paired CHSET file");
          if (es_dict_dl.empty()) throw std::invalid_argument("joint needs --dict-dl");
          dd = load_dictionary(es_dict_dl);
        }
        const std::vector<CMatrix>& truth = set.paired() ? set.downlink : set.channels;
        for (std::size_t i = 0; i < truth.size(); ++i) {
          Rng rng = substream(es_seed, i, 0x5e);
          const DownlinkPilots a = downlink_pilots(es_td, set.antennas, rho, rng);
          const DownlinkObservation obs = simulate_downlink(truth[i], a, rng);
          CMatrix est;
          if (es_est == "ls") {
            est = downlink_ls(obs).estimate;
          } else if (es_est == "cs") {
            est = downlink_cs(obs, d, {}, mode).estimate;
          } else {
            const UplinkObservation ul =
                simulate_uplink(set.channels[i], orthogonal_pilots(1, es_tu, rho), rng);
            est = joint_estimate(ul, obs, d, dd).downlink;
          }
          values.push_back(nmse(truth[i], est));
        }
      }
      if (!es_out.empty()) {
        std::ofstream out = open_out(es_out);
        out << "trial,nmse,nmse_db\n";
        for (std::size_t i = 0; i < values.size(); ++i)
          out << i << ',' << num(values[i]) << ',' << num(to_db(values[i])) << '\n';
      }
      const auto [m, se] = mean_and_stderr(values);
      std::cout << "estimator,trials,mean_nmse,stderr,mean_nmse_db\n"
                << es_est << ',' << values.size() << ',' << num(m) << ',' << num(se) << ','
                << num(to_db(m)) << '\n';
    } else if (*ex_cmd) {
      const ScenarioConfig c = load_scenario(ex_scenario);
      HarnessOptions o;
      o.cache_dir = ex_cache;
      if (!ex_quiet) o.log = &std::cerr;
      const ExperimentResult r = run_experiment(c, o);
      emit_csv(r, ex_out);
      write_manifest(r, ex_manifest.empty() ? ex_out + ".manifest.json" : ex_manifest);
    } else if (*co_cmd) {
      if (co_dict.empty() && co_pilots.empty())
        throw std::invalid_argument("coherence needs --dict, --pilots or both");
      std::optional<Dictionary> d;
      std::optional<PilotMatrix> p;
      if (!co_dict.empty()) {
        d = load_dictionary(co_dict);
        std::cout << "dictionary " << num(mutual_coherence(d->matrix)) << '\n';
      }
      if (!co_pilots.empty()) {
        p = load_pilots(co_pilots);
        std::cout << "pilots " << num(pilot_coherence(*p)) << '\n';
        if (p->symbols() < p->users())
          std::cout << "welch_bound " << num(welch_bound(p->users(), p->symbols())) << '\n';
      }
      if (d && p) std::cout << "kronecker " << num(mutual_coherence(kron_sensing_matrix(p->S, d->matrix))) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
