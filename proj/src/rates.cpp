#include "m2m/rates.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "m2m/error.hpp"

namespace m2m {

double sic_rate(const std::vector<double>& gains, const std::vector<double>& powers,
                std::size_t position, double time_s, double bandwidth_hz, double noise_w) {
  if (gains.size() != powers.size() || position >= gains.size())
    fail(ErrorKind::Dimension, "sic_rate: gains/powers mismatch or position out of range");
  if (time_s <= 0.0) return 0.0;
  double interference = noise_w;
  for (std::size_t l = position + 1; l < gains.size(); ++l) interference += gains[l] * powers[l];
  return bandwidth_hz * time_s * std::log2(1.0 + gains[position] * powers[position] / interference);
}

double noma_device_rate(const NetworkTopology& topo, const SystemParams& params,
                        std::size_t gateway, std::size_t device, const std::vector<double>& p,
                        double time_s) {
  if (gateway >= topo.n_gateways) fail(ErrorKind::Dimension, "gateway index out of range");
  if (p.size() != topo.n_devices) fail(ErrorKind::Dimension, "device power vector has wrong size");
  const auto& group = topo.groups[gateway];
  const auto it = std::find(group.begin(), group.end(), device);
  if (it == group.end())
    fail(ErrorKind::Domain, "device " + std::to_string(device) + " is not served by gateway " +
                                std::to_string(gateway));
  std::vector<double> gains, powers;
  for (std::size_t j : group) {
    gains.push_back(topo.serving_gain[j]);
    powers.push_back(p[j]);
  }
  return sic_rate(gains, powers, static_cast<std::size_t>(it - group.begin()), time_s,
                  params.bandwidth_hz, params.noise_w);
}

double noma_gateway_rate(const NetworkTopology& topo, const SystemParams& params,
                         std::size_t cluster, std::size_t gateway, const std::vector<double>& q,
                         double time_s) {
  if (cluster >= topo.n_clusters()) fail(ErrorKind::Dimension, "cluster index out of range");
  if (q.size() != topo.n_gateways) fail(ErrorKind::Dimension, "gateway power vector has wrong size");
  const auto& members = topo.clusters[cluster];
  const auto it = std::find(members.begin(), members.end(), gateway);
  if (it == members.end())
    fail(ErrorKind::Domain, "gateway " + std::to_string(gateway) + " is not in cluster " +
                                std::to_string(cluster));
  std::vector<double> gains, powers;
  for (std::size_t i : members) {
    gains.push_back(topo.bs_gain[i]);
    powers.push_back(q[i]);
  }
  return sic_rate(gains, powers, static_cast<std::size_t>(it - members.begin()), time_s,
                  params.bandwidth_hz, params.noise_w);
}

double tdma_rate(double gain, double power_w, double time_s, const SystemParams& params) {
  if (time_s <= 0.0) return 0.0;
  return params.bandwidth_hz * time_s * std::log2(1.0 + gain * power_w / params.noise_w);
}

}  // namespace m2m
