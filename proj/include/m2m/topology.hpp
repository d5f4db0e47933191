#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace m2m {

/// Linear channel gain for the 128.1 + 37.6 log10(d) macro path-loss model
/// plus an additive shadowing term (dB). Distance in km.
double path_loss_linear(double distance_km, double shadow_db = 0.0);
double path_loss_db(double distance_km);

enum class Placement {
  Clustered,  // devices dropped in a small annulus around a gateway
  Uniform,    // devices uniform in a disc around the base station
};

struct GeometryConfig {
  std::size_t n_devices = 40;
  std::size_t n_gateways = 12;
  std::size_t n_clusters = 6;
  std::size_t max_group_size = 4;
  std::size_t max_cluster_size = 4;

  Placement placement = Placement::Clustered;
  double cell_radius_km = 0.5;       // device disc for Placement::Uniform
  double gateway_ring_km = 0.3;      // gateways sit evenly on this ring
  double gateway_ring_jitter_km = 0.03;
  double device_min_distance_km = 0.0010;  // annulus for Placement::Clustered
  double device_max_distance_km = 0.0017;
  double shadowing_std_db = 4.0;

  void validate() const;
};

struct Point {
  double x_km = 0.0;
  double y_km = 0.0;
};

/// Devices, gateways, associations and every channel gain of one instance.
///
/// `groups[i]` lists the devices served by gateway i in SIC decoding order
/// (descending serving gain); `clusters[k]` lists the gateways sharing the
/// k-th uplink phase in descending base-station gain. Gains are linear power
/// gains. `cross_gain` covers every (gateway, device) pair and is the link
/// used for harvesting; `serving_gain[j]` is device j's uplink to its own
/// gateway. The generator draws both from one reciprocal channel.
struct NetworkTopology {
  std::size_t n_gateways = 0;
  std::size_t n_devices = 0;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<double> serving_gain;
  std::vector<double> cross_gain;  // row-major, n_gateways x n_devices
  std::vector<double> bs_gain;

  // Derived lookups, filled by finalize().
  std::vector<std::size_t> serving_gateway;
  std::vector<std::size_t> cluster_of_gateway;

  std::vector<Point> device_positions;
  std::vector<Point> gateway_positions;

  std::size_t n_clusters() const { return clusters.size(); }
  double gain(std::size_t gateway, std::size_t device) const {
    return cross_gain[gateway * n_devices + device];
  }
  /// Received power at `device` during cluster k's phase for gateway powers q.
  double cluster_received_power(std::size_t cluster, std::size_t device,
                                const std::vector<double>& q) const;

  /// Sorts groups/clusters into SIC order, fills the lookups, then validates.
  void finalize();
  /// Throws Error(Config) unless groups/clusters partition the index sets,
  /// orders are non-increasing, and all gains are positive.
  void validate() const;
};

/// Deterministic random instance for a given seed.
NetworkTopology generate_topology(const GeometryConfig& geometry, std::uint64_t seed);

/// Strong-weak pairing generalised to any cluster count: gateways ranked by
/// base-station gain are dealt out in a serpentine order, so with N = 2K
/// cluster k holds ranks k and N-1-k.
std::vector<std::vector<std::size_t>> strong_weak_clusters(const std::vector<double>& bs_gain,
                                                           std::size_t n_clusters);

}  // namespace m2m
