#pragma once

#include <optional>
#include <vector>

#include "fddcs/random.hpp"
#include "fddcs/types.hpp"

// Geometry-based stochastic channels for one specific cell. The cell's fixed
// scattering clusters are drawn once and then shared by every user draw, so a
// dictionary learned on one batch of users transfers to the next.

namespace fddcs {

enum class ArrayKind { ula, ura };

/// Antenna array at the base station. Element positions are in units of the
/// nominal spacing; URA elements are ordered with the vertical index fastest.
struct ArrayGeometry {
  ArrayKind kind = ArrayKind::ula;
  Index n1 = 1;  // vertical elements (the only axis for a ULA)
  Index n2 = 1;  // horizontal elements
  RVector positions1;
  RVector positions2;
  RVector gains;  // per element, n1 * n2 entries
  double spacing_m = 0.0;

  Index size() const { return n1 * n2; }
};

/// d = c / (2 f0).
inline double half_wavelength_spacing(double reference_frequency_hz) {
  return kSpeedOfLight / (2.0 * reference_frequency_hz);
}

ArrayGeometry make_ula(Index n, double spacing_m);
ArrayGeometry make_ura(Index n1, Index n2, double spacing_m);
void validate_geometry(const ArrayGeometry& g);

/// Path direction. ULA uses theta only (angle from broadside, in
/// [-pi/2, pi/2]); URA uses theta as zenith in [0, pi] and phi as azimuth.
struct Angles {
  double theta = 0.0;
  double phi = 0.0;
};

CVector array_response(const ArrayGeometry& g, const Angles& angles, double wavelength);

enum class ClusterKind { fixed, user_dependent };

struct ScatteringCluster {
  double x = 0.0;  // meters; BS at the origin, broadside along +x
  double y = 0.0;
  double height = 0.0;
  double azimuth_spread = 0.0;  // radians
  double zenith_spread = 0.0;   // radians, 3D only
  Index subpath_count = 20;
  ClusterKind kind = ClusterKind::fixed;
};

struct CellConfig {
  bool three_d = false;
  Index fixed_cluster_count = 21;
  double cell_radius = 900.0;
  double azimuth_min = -kPi / 2;
  double azimuth_max = kPi / 2;
  double bs_height = 10.0;
  double ue_height = 1.5;
  double cluster_height_min = 0.5;
  double cluster_height_max = 30.0;
  double min_ue_distance = 300.0;
  Index clusters_per_user = 3;
  Index subpaths = 20;
  double azimuth_spread = 5.0 * kPi / 180.0;
  double zenith_spread = 2.0 * kPi / 180.0;
  double user_cluster_radius = 50.0;
  double power_decay = 0.5;  // cluster i gets power ~ exp(-power_decay * i)
};

/// 2D microwave cell: 21 clusters, radius 900 m, 3 nearest clusters per user.
CellConfig microwave_cell();
/// 3D mmWave cell: radius 200 m, 1 nearest cluster per user, clusters with height.
CellConfig mmwave_cell();

void validate_cell_config(const CellConfig& c);

struct CellEnvironment {
  CellConfig config;
  std::vector<ScatteringCluster> fixed_clusters;
  std::uint64_t seed = 0;
};

CellEnvironment generate_cell_environment(const CellConfig& config, std::uint64_t seed);

/// One cluster's contribution: subpath directions and complex gains
/// (subpaths x ue_antennas).
struct PathCluster {
  int cluster_id = -1;  // index into fixed_clusters, -1 for the user-dependent one
  std::vector<Angles> subpath_angles;
  CMatrix gains;
};

struct ChannelRealization {
  CMatrix h;  // N x N_R
  double frequency_hz = 0.0;
  double ue_x = 0.0;
  double ue_y = 0.0;
  std::vector<PathCluster> truth;

  CVector vector() const { return h.col(0); }
};

struct UplinkDownlinkPair {
  ChannelRealization uplink;
  ChannelRealization downlink;
};

/// Optional restriction of the UE azimuth (used for angle-separated users).
struct UserPlacement {
  double azimuth_min = 0.0;
  double azimuth_max = 0.0;
};

/// Rebuilds the channel from stored path metadata.
CMatrix synthesize(const ArrayGeometry& g, const std::vector<PathCluster>& truth,
                   double wavelength);

ChannelRealization draw_user_channel(const CellEnvironment& env, const ArrayGeometry& g,
                                     double frequency_hz, Index ue_antennas, Rng& rng,
                                     std::optional<UserPlacement> placement = std::nullopt);

UplinkDownlinkPair draw_ul_dl_pair(const CellEnvironment& env, const ArrayGeometry& g,
                                   double uplink_hz, double downlink_hz, Rng& rng,
                                   std::optional<UserPlacement> placement = std::nullopt);

struct UncertaintyConfig {
  Index perturbed_gains = 0;
  Index perturbed_spacings = 0;
  double std_dev = 0.31622776601683794;  // e ~ N(0, 0.1), variance 0.1
  double clamp_low = 0.8;
  double clamp_high = 1.2;
};

/// 1 + e clamped into [clamp_low, clamp_high].
double clamped_perturbation(double e, double clamp_low = 0.8, double clamp_high = 1.2);

ArrayGeometry apply_array_uncertainty(const ArrayGeometry& g, const UncertaintyConfig& u,
                                      Rng& rng);

}  // namespace fddcs
