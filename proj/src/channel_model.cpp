#include "fddcs/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fddcs {

ArrayGeometry make_ula(Index n, double spacing_m) {
  if (n < 1) throw std::invalid_argument("make_ula: need at least one element");
  if (!(spacing_m > 0.0)) throw std::invalid_argument("make_ula: spacing must be positive");
  ArrayGeometry g;
  g.kind = ArrayKind::ula;
  g.n1 = n;
  g.n2 = 1;
  g.positions1 = RVector::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  g.positions2 = RVector::Zero(1);
  g.gains = RVector::Ones(n);
  g.spacing_m = spacing_m;
  return g;
}

ArrayGeometry make_ura(Index n1, Index n2, double spacing_m) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("make_ura: need at least one element");
  if (!(spacing_m > 0.0)) throw std::invalid_argument("make_ura: spacing must be positive");
  ArrayGeometry g;
  g.kind = ArrayKind::ura;
  g.n1 = n1;
  g.n2 = n2;
  g.positions1 = RVector::LinSpaced(n1, 0.0, static_cast<double>(n1 - 1));
  g.positions2 = RVector::LinSpaced(n2, 0.0, static_cast<double>(n2 - 1));
  g.gains = RVector::Ones(n1 * n2);
  g.spacing_m = spacing_m;
  return g;
}

namespace {

void check_increasing(const RVector& p, const char* axis) {
  for (Index i = 1; i < p.size(); ++i)
    if (!(p(i) > p(i - 1)))
      throw std::invalid_argument(std::string("geometry: ") + axis +
                                  " positions must be strictly increasing");
}

}  // namespace

void validate_geometry(const ArrayGeometry& g) {
  if (g.n1 < 1 || g.n2 < 1) throw std::invalid_argument("geometry: empty array");
  if (g.kind == ArrayKind::ula && g.n2 != 1) throw std::invalid_argument("geometry: ULA needs n2 = 1");
  if (g.positions1.size() != g.n1 || g.positions2.size() != g.n2)
    throw std::invalid_argument("geometry: position vectors do not match element counts");
  if (g.gains.size() != g.size()) throw std::invalid_argument("geometry: gain count mismatch");
  if ((g.gains.array() <= 0.0).any()) throw std::invalid_argument("geometry: gains must be > 0");
  if (!(g.spacing_m > 0.0)) throw std::invalid_argument("geometry: spacing must be positive");
  check_increasing(g.positions1, "vertical");
  check_increasing(g.positions2, "horizontal");
}

CVector array_response(const ArrayGeometry& g, const Angles& angles, double wavelength) {
  if (!(wavelength > 0.0)) throw std::invalid_argument("array_response: wavelength must be > 0");
  constexpr double slack = 1e-12;
  CVector a(g.size());
  const double k = 2.0 * kPi * g.spacing_m / wavelength;
  if (g.kind == ArrayKind::ula) {
    if (std::abs(angles.theta) > kPi / 2 + slack)
      throw std::invalid_argument("array_response: ULA angle outside [-pi/2, pi/2]");
    const double s = std::sin(angles.theta);
    for (Index n = 0; n < g.n1; ++n)
      a(n) = g.gains(n) * std::polar(1.0, k * g.positions1(n) * s);
    return a;
  }
  if (angles.theta < -slack || angles.theta > kPi + slack)
    throw std::invalid_argument("array_response: zenith angle outside [0, pi]");
  const double u = k * std::cos(angles.theta);
  const double v = k * std::sin(angles.theta) * std::cos(angles.phi);
  for (Index m = 0; m < g.n2; ++m)
    for (Index n = 0; n < g.n1; ++n) {
      const Index idx = m * g.n1 + n;
      a(idx) = g.gains(idx) * std::polar(1.0, g.positions1(n) * u + g.positions2(m) * v);
    }
  return a;
}

CellConfig microwave_cell() { return CellConfig{}; }

CellConfig mmwave_cell() {
  CellConfig c;
  c.three_d = true;
  c.cell_radius = 200.0;
  c.azimuth_min = 0.0;
  c.azimuth_max = kPi;
  c.min_ue_distance = 60.0;
  c.clusters_per_user = 1;
  return c;
}

void validate_cell_config(const CellConfig& c) {
  if (c.fixed_cluster_count < 1) throw std::invalid_argument("cell: need at least one fixed cluster");
  if (!(c.cell_radius > 0.0)) throw std::invalid_argument("cell: radius must be positive");
  if (!(c.azimuth_max > c.azimuth_min)) throw std::invalid_argument("cell: empty azimuth range");
  if (c.min_ue_distance < 0.0 || c.min_ue_distance >= c.cell_radius)
    throw std::invalid_argument("cell: min UE distance must lie inside the cell");
  if (c.clusters_per_user < 1 || c.clusters_per_user > c.fixed_cluster_count)
    throw std::invalid_argument("cell: clusters per user out of range");
  if (c.subpaths < 1) throw std::invalid_argument("cell: subpath count must be >= 1");
  if (!(c.azimuth_spread > 0.0) || (c.three_d && !(c.zenith_spread > 0.0)))
    throw std::invalid_argument("cell: angular spreads must be positive");
  if (c.three_d && !(c.cluster_height_max >= c.cluster_height_min))
    throw std::invalid_argument("cell: invalid cluster height range");
  if (c.user_cluster_radius < 0.0) throw std::invalid_argument("cell: negative user cluster radius");
}

CellEnvironment generate_cell_environment(const CellConfig& config, std::uint64_t seed) {
  validate_cell_config(config);
  CellEnvironment env;
  env.config = config;
  env.seed = seed;
  Rng rng = substream(seed, 0, 0xce11);
  env.fixed_clusters.reserve(static_cast<std::size_t>(config.fixed_cluster_count));
  for (Index i = 0; i < config.fixed_cluster_count; ++i) {
    ScatteringCluster c;
    const double r = config.cell_radius * std::sqrt(uniform(rng, 0.0, 1.0));
    const double az = uniform(rng, config.azimuth_min, config.azimuth_max);
    c.x = r * std::cos(az);
    c.y = r * std::sin(az);
    c.height = config.three_d ? uniform(rng, config.cluster_height_min, config.cluster_height_max)
                              : 0.0;
    c.azimuth_spread = config.azimuth_spread;
    c.zenith_spread = config.zenith_spread;
    c.subpath_count = config.subpaths;
    c.kind = ClusterKind::fixed;
    env.fixed_clusters.push_back(c);
  }
  return env;
}

namespace {

double reflect_into(double x, double lo, double hi) {
  // Mirror at the boundaries; spreads are small so one or two folds suffice.
  for (int i = 0; i < 8 && (x < lo || x > hi); ++i) {
    if (x < lo) x = 2 * lo - x;
    if (x > hi) x = 2 * hi - x;
  }
  return std::clamp(x, lo, hi);
}

/// Mean direction of a cluster as seen from the BS.
Angles cluster_direction(const CellEnvironment& env, const ScatteringCluster& c) {
  const double az = std::atan2(c.y, c.x);
  if (!env.config.three_d) return {az, 0.0};
  const double rho = std::hypot(c.x, c.y);
  const double zenith = std::atan2(rho, c.height - env.config.bs_height);
  return {zenith, az};
}

struct UserGeometry {
  double x = 0.0;
  double y = 0.0;
  std::vector<int> cluster_ids;
  std::vector<double> powers;
  std::vector<std::vector<Angles>> subpaths;
};

UserGeometry draw_user_geometry(const CellEnvironment& env, const ArrayGeometry& g, Rng& rng,
                                const std::optional<UserPlacement>& placement) {
  const CellConfig& cfg = env.config;
  if (cfg.three_d != (g.kind == ArrayKind::ura))
    throw std::invalid_argument("draw_user_channel: 2D cells need a ULA, 3D cells a URA");
  if (cfg.subpaths < 1) throw std::invalid_argument("draw_user_channel: zero subpaths");

  double az_lo = cfg.azimuth_min;
  double az_hi = cfg.azimuth_max;
  if (placement) {
    az_lo = std::max(az_lo, placement->azimuth_min);
    az_hi = std::min(az_hi, placement->azimuth_max);
    if (!(az_hi > az_lo)) throw std::invalid_argument("draw_user_channel: empty placement window");
  }

  UserGeometry u;
  const double r2_lo = cfg.min_ue_distance * cfg.min_ue_distance;
  const double r2_hi = cfg.cell_radius * cfg.cell_radius;
  const double r = std::sqrt(uniform(rng, r2_lo, r2_hi));
  const double az = uniform(rng, az_lo, az_hi);
  u.x = r * std::cos(az);
  u.y = r * std::sin(az);

  // Nearest fixed clusters; ties go to the lower id.
  std::vector<int> order(env.fixed_clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dist(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    dist[i] = std::hypot(env.fixed_clusters[i].x - u.x, env.fixed_clusters[i].y - u.y);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });

  std::vector<ScatteringCluster> clusters;
  for (Index i = 0; i < cfg.clusters_per_user; ++i) {
    u.cluster_ids.push_back(order[static_cast<std::size_t>(i)]);
    clusters.push_back(env.fixed_clusters[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }

  ScatteringCluster local;
  const double lr = cfg.user_cluster_radius * std::sqrt(uniform(rng, 0.0, 1.0));
  const double la = uniform(rng, -kPi, kPi);
  local.x = u.x + lr * std::cos(la);
  local.y = u.y + lr * std::sin(la);
  local.height = cfg.three_d ? uniform(rng, cfg.cluster_height_min, cfg.cluster_height_max) : 0.0;
  local.azimuth_spread = cfg.azimuth_spread;
  local.zenith_spread = cfg.zenith_spread;
  local.subpath_count = cfg.subpaths;
  local.kind = ClusterKind::user_dependent;
  u.cluster_ids.push_back(-1);
  clusters.push_back(local);

  double total = 0.0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    u.powers.push_back(std::exp(-cfg.power_decay * static_cast<double>(i)));
    total += u.powers.back();
  }
  for (double& p : u.powers) p /= total;

  std::normal_distribution<double> az_offset(0.0, 1.0);
  for (const ScatteringCluster& c : clusters) {
    const Angles mean = cluster_direction(env, c);
    std::vector<Angles> paths;
    paths.reserve(static_cast<std::size_t>(c.subpath_count));
    for (Index l = 0; l < c.subpath_count; ++l) {
      Angles a;
      if (!cfg.three_d) {
        a.theta = reflect_into(mean.theta + c.azimuth_spread * az_offset(rng), -kPi / 2, kPi / 2);
      } else {
        a.theta = reflect_into(mean.theta + c.zenith_spread * az_offset(rng), 0.0, kPi);
        a.phi = mean.phi + c.azimuth_spread * az_offset(rng);
      }
      paths.push_back(a);
    }
    u.subpaths.push_back(std::move(paths));
  }
  return u;
}

ChannelRealization realize(const UserGeometry& u, const ArrayGeometry& g, double frequency_hz,
                           Index ue_antennas, Rng& rng) {
  ChannelRealization out;
  out.frequency_hz = frequency_hz;
  out.ue_x = u.x;
  out.ue_y = u.y;
  for (std::size_t i = 0; i < u.subpaths.size(); ++i) {
    PathCluster pc;
    pc.cluster_id = u.cluster_ids[i];
    pc.subpath_angles = u.subpaths[i];
    const auto ns = static_cast<Index>(pc.subpath_angles.size());
    pc.gains = complex_gaussian_matrix(ns, ue_antennas, rng, u.powers[i] / static_cast<double>(ns));
    out.truth.push_back(std::move(pc));
  }
  out.h = synthesize(g, out.truth, kSpeedOfLight / frequency_hz);
  return out;
}

}  // namespace

CMatrix synthesize(const ArrayGeometry& g, const std::vector<PathCluster>& truth,
                   double wavelength) {
  if (truth.empty()) throw std::invalid_argument("synthesize: no paths");
  const Index nr = truth.front().gains.cols();
  CMatrix h = CMatrix::Zero(g.size(), nr);
  for (const PathCluster& pc : truth) {
    if (pc.gains.rows() != static_cast<Index>(pc.subpath_angles.size()) || pc.gains.cols() != nr)
      throw std::invalid_argument("synthesize: gain matrix does not match path list");
    for (std::size_t l = 0; l < pc.subpath_angles.size(); ++l) {
      const CVector a = array_response(g, pc.subpath_angles[l], wavelength);
      h += a * pc.gains.row(static_cast<Index>(l));
    }
  }
  return h;
}

ChannelRealization draw_user_channel(const CellEnvironment& env, const ArrayGeometry& g,
                                     double frequency_hz, Index ue_antennas, Rng& rng,
                                     std::optional<UserPlacement> placement) {
  if (!(frequency_hz > 0.0)) throw std::invalid_argument("draw_user_channel: frequency must be > 0");
  if (ue_antennas < 1) throw std::invalid_argument("draw_user_channel: need >= 1 UE antenna");
  validate_geometry(g);
  const UserGeometry u = draw_user_geometry(env, g, rng, placement);
  return realize(u, g, frequency_hz, ue_antennas, rng);
}

UplinkDownlinkPair draw_ul_dl_pair(const CellEnvironment& env, const ArrayGeometry& g,
                                   double uplink_hz, double downlink_hz, Rng& rng,
                                   std::optional<UserPlacement> placement) {
  if (!(uplink_hz > 0.0) || !(downlink_hz > 0.0))
    throw std::invalid_argument("draw_ul_dl_pair: frequencies must be > 0");
  validate_geometry(g);
  const UserGeometry u = draw_user_geometry(env, g, rng, placement);
  UplinkDownlinkPair p;
  p.uplink = realize(u, g, uplink_hz, 1, rng);
  p.downlink = realize(u, g, downlink_hz, 1, rng);
  return p;
}

double clamped_perturbation(double e, double clamp_low, double clamp_high) {
  return std::clamp(1.0 + e, clamp_low, clamp_high);
}

namespace {

std::vector<Index> choose_subset(Index population, Index count, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(population));
  std::iota(idx.begin(), idx.end(), Index{0});
  // Partial Fisher-Yates with our own uniform draws (std::shuffle is not
  // specified bit-for-bit).
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, population - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

RVector positions_from_gaps(const RVector& gaps) {
  RVector p(gaps.size() + 1);
  p(0) = 0.0;
  for (Index i = 0; i < gaps.size(); ++i) p(i + 1) = p(i) + gaps(i);
  return p;
}

}  // namespace

ArrayGeometry apply_array_uncertainty(const ArrayGeometry& g, const UncertaintyConfig& u,
                                      Rng& rng) {
  validate_geometry(g);
  const Index gaps = (g.n1 - 1) + (g.n2 - 1);
  if (u.perturbed_gains < 0 || u.perturbed_gains > g.size())
    throw std::invalid_argument("apply_array_uncertainty: perturbed gain count out of range");
  if (u.perturbed_spacings < 0 || u.perturbed_spacings > gaps)
    throw std::invalid_argument("apply_array_uncertainty: perturbed spacing count out of range");

  ArrayGeometry out = g;
  std::normal_distribution<double> noise(0.0, u.std_dev);
  for (Index i : choose_subset(g.size(), u.perturbed_gains, rng))
    out.gains(i) = clamped_perturbation(noise(rng), u.clamp_low, u.clamp_high);

  RVector gap1(g.n1 - 1), gap2(g.n2 - 1);
  for (Index i = 0; i + 1 < g.n1; ++i) gap1(i) = g.positions1(i + 1) - g.positions1(i);
  for (Index i = 0; i + 1 < g.n2; ++i) gap2(i) = g.positions2(i + 1) - g.positions2(i);
  for (Index i : choose_subset(gaps, u.perturbed_spacings, rng)) {
    const double f = clamped_perturbation(noise(rng), u.clamp_low, u.clamp_high);
    if (i < g.n1 - 1)
      gap1(i) *= f;
    else
      gap2(i - (g.n1 - 1)) *= f;
  }
  out.positions1 = positions_from_gaps(gap1);
  out.positions2 = positions_from_gaps(gap2);
  out.positions1.array() += g.positions1(0);
  out.positions2.array() += g.positions2(0);
  return out;
}

}  // namespace fddcs
