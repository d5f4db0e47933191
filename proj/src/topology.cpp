#include "m2m/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <tuple>

#include "m2m/error.hpp"

namespace m2m {

double path_loss_db(double distance_km) {
  if (!(distance_km > 0.0))
    fail(ErrorKind::Domain, "path loss needs a positive distance, got " + std::to_string(distance_km));
  return 128.1 + 37.6 * std::log10(distance_km);
}

double path_loss_linear(double distance_km, double shadow_db) {
  return std::pow(10.0, -(path_loss_db(distance_km) + shadow_db) / 10.0);
}

void GeometryConfig::validate() const {
  if (n_devices == 0 || n_gateways == 0 || n_clusters == 0)
    fail(ErrorKind::Config, "device, gateway and cluster counts must be positive");
  if (n_devices > max_group_size * n_gateways)
    fail(ErrorKind::Config, std::to_string(n_devices) + " devices exceed the capacity of " +
                                std::to_string(n_gateways) + " gateways with at most " +
                                std::to_string(max_group_size) + " devices each");
  if (n_gateways > max_cluster_size * n_clusters)
    fail(ErrorKind::Config, std::to_string(n_gateways) + " gateways do not fit in " +
                                std::to_string(n_clusters) + " clusters of at most " +
                                std::to_string(max_cluster_size));
  if (n_clusters > n_gateways) fail(ErrorKind::Config, "more clusters than gateways");
  if (!(cell_radius_km > 0) || !(gateway_ring_km > 0))
    fail(ErrorKind::Config, "cell radius and gateway ring must be positive");
  if (!(device_min_distance_km > 0) || device_max_distance_km < device_min_distance_km)
    fail(ErrorKind::Config, "device annulus needs 0 < min <= max distance");
  if (gateway_ring_jitter_km < 0 || gateway_ring_jitter_km >= gateway_ring_km)
    fail(ErrorKind::Config, "gateway ring jitter must lie in [0, ring radius)");
  if (shadowing_std_db < 0) fail(ErrorKind::Config, "shadowing std must be non-negative");
}

double NetworkTopology::cluster_received_power(std::size_t cluster, std::size_t device,
                                               const std::vector<double>& q) const {
  double rx = 0.0;
  for (std::size_t n : clusters[cluster]) rx += gain(n, device) * q[n];
  return rx;
}

void NetworkTopology::finalize() {
  if (serving_gain.size() != n_devices || bs_gain.size() != n_gateways ||
      cross_gain.size() != n_gateways * n_devices || groups.size() != n_gateways)
    fail(ErrorKind::Dimension, "topology arrays do not match the declared node counts");
  for (auto& group : groups)
    std::stable_sort(group.begin(), group.end(),
                     [&](std::size_t l, std::size_t r) { return serving_gain[l] > serving_gain[r]; });
  for (auto& cluster : clusters)
    std::stable_sort(cluster.begin(), cluster.end(),
                     [&](std::size_t l, std::size_t r) { return bs_gain[l] > bs_gain[r]; });
  serving_gateway.assign(n_devices, n_gateways);
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j : groups[i])
      if (j < n_devices) serving_gateway[j] = i;
  cluster_of_gateway.assign(n_gateways, clusters.size());
  for (std::size_t k = 0; k < clusters.size(); ++k)
    for (std::size_t i : clusters[k])
      if (i < n_gateways) cluster_of_gateway[i] = k;
  validate();
}

void NetworkTopology::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::Config, "invalid topology: " + what); };
  std::vector<int> seen(n_devices, 0);
  for (const auto& group : groups) {
    for (std::size_t j : group) {
      if (j >= n_devices) bad("device index out of range");
      ++seen[j];
    }
    for (std::size_t s = 1; s < group.size(); ++s)
      if (serving_gain[group[s]] > serving_gain[group[s - 1]]) bad("group not in SIC order");
  }
  for (int c : seen)
    if (c != 1) bad("groups do not partition the devices");
  std::vector<int> seen_gw(n_gateways, 0);
  for (const auto& cluster : clusters) {
    if (cluster.empty()) bad("empty cluster");
    for (std::size_t i : cluster) {
      if (i >= n_gateways) bad("gateway index out of range");
      ++seen_gw[i];
    }
    for (std::size_t s = 1; s < cluster.size(); ++s)
      if (bs_gain[cluster[s]] > bs_gain[cluster[s - 1]]) bad("cluster not in SIC order");
  }
  for (int c : seen_gw)
    if (c != 1) bad("clusters do not partition the gateways");
  for (double g : serving_gain)
    if (!(g > 0)) bad("non-positive serving gain");
  for (double g : cross_gain)
    if (!(g > 0)) bad("non-positive cross gain");
  for (double g : bs_gain)
    if (!(g > 0)) bad("non-positive base-station gain");
}

std::vector<std::vector<std::size_t>> strong_weak_clusters(const std::vector<double>& bs_gain,
                                                           std::size_t n_clusters) {
  std::vector<std::size_t> rank(bs_gain.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t l, std::size_t r) { return bs_gain[l] > bs_gain[r]; });
  std::vector<std::vector<std::size_t>> clusters(n_clusters);
  for (std::size_t r = 0; r < rank.size(); ++r) {
    const std::size_t layer = r / n_clusters;
    const std::size_t pos = r % n_clusters;
    const std::size_t k = (layer % 2 == 0) ? pos : n_clusters - 1 - pos;
    clusters[k].push_back(rank[r]);
  }
  return clusters;
}

NetworkTopology generate_topology(const GeometryConfig& geometry, std::uint64_t seed) {
  geometry.validate();
  const std::size_t n_gw = geometry.n_gateways;
  const std::size_t n_dev = geometry.n_devices;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> shadow(0.0, geometry.shadowing_std_db);
  auto draw_shadow = [&] { return geometry.shadowing_std_db > 0 ? shadow(rng) : 0.0; };

  NetworkTopology topo;
  topo.n_gateways = n_gw;
  topo.n_devices = n_dev;

  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n_gw; ++i) {
    const double radius =
        geometry.gateway_ring_km + geometry.gateway_ring_jitter_km * (2.0 * unit(rng) - 1.0);
    const double angle = two_pi * static_cast<double>(i) / static_cast<double>(n_gw);
    topo.gateway_positions.push_back({radius * std::cos(angle), radius * std::sin(angle)});
  }
  for (std::size_t j = 0; j < n_dev; ++j) {
    const double angle = two_pi * unit(rng);
    if (geometry.placement == Placement::Uniform) {
      const double r = geometry.cell_radius_km * std::sqrt(unit(rng));
      topo.device_positions.push_back({r * std::cos(angle), r * std::sin(angle)});
    } else {
      // Uniform over the annulus around the anchor gateway.
      const double r0 = geometry.device_min_distance_km;
      const double r1 = geometry.device_max_distance_km;
      const double r = std::sqrt(r0 * r0 + (r1 * r1 - r0 * r0) * unit(rng));
      const Point& anchor = topo.gateway_positions[j % n_gw];
      topo.device_positions.push_back(
          {anchor.x_km + r * std::cos(angle), anchor.y_km + r * std::sin(angle)});
    }
  }

  auto distance = [](const Point& a, const Point& b) {
    return std::max(std::hypot(a.x_km - b.x_km, a.y_km - b.y_km), 1e-6);
  };

  // One reciprocal channel per (gateway, device) pair.
  topo.cross_gain.resize(n_gw * n_dev);
  for (std::size_t i = 0; i < n_gw; ++i)
    for (std::size_t j = 0; j < n_dev; ++j)
      topo.cross_gain[i * n_dev + j] = path_loss_linear(
          distance(topo.gateway_positions[i], topo.device_positions[j]), draw_shadow());
  for (std::size_t i = 0; i < n_gw; ++i)
    topo.bs_gain.push_back(path_loss_linear(distance(topo.gateway_positions[i], Point{}),
                                            draw_shadow()));

  // Nearest-gateway association with a capacity cap; ties resolve by device
  // index, then gateway index.
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  pairs.reserve(n_gw * n_dev);
  for (std::size_t j = 0; j < n_dev; ++j)
    for (std::size_t i = 0; i < n_gw; ++i)
      pairs.emplace_back(distance(topo.gateway_positions[i], topo.device_positions[j]), j, i);
  std::sort(pairs.begin(), pairs.end());
  topo.groups.assign(n_gw, {});
  std::vector<bool> assigned(n_dev, false);
  for (const auto& [d, j, i] : pairs) {
    if (assigned[j] || topo.groups[i].size() >= geometry.max_group_size) continue;
    topo.groups[i].push_back(j);
    assigned[j] = true;
  }

  topo.serving_gain.resize(n_dev);
  for (std::size_t i = 0; i < n_gw; ++i)
    for (std::size_t j : topo.groups[i]) topo.serving_gain[j] = topo.gain(i, j);

  topo.clusters = strong_weak_clusters(topo.bs_gain, geometry.n_clusters);
  topo.finalize();
  return topo;
}

}  // namespace m2m
