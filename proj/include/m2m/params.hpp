#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace m2m {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Constants of the logistic energy-harvesting model. All powers in watts.
struct EhModel {
  double a = 1500.0;
  double b = 0.0014;
  double saturation_w = 0.024;
  double threshold_w = 1e-4;  // receiver sensitivity P0
};

/// Physical and traffic parameters of one network instance.
///
/// Per-node vectors are indexed by device (payload, device power cap) or by
/// gateway (gateway power cap). Everything is SI: W, s, Hz, bits.
struct SystemParams {
  double bandwidth_hz = 18e3;
  double noise_w = dbm_to_watts(-104.0);
  double pa_eff_device = 0.9;
  double pa_eff_gateway = 0.9;
  double circuit_device_w = 0.5e-3;
  double circuit_gateway_w = 0.5;
  double deadline_s = 5.0;
  EhModel eh;

  std::vector<double> max_power_device_w;
  std::vector<double> max_power_gateway_w;
  std::vector<double> payload_bits;

  /// Builds params with identical caps and payloads for every node.
  static SystemParams uniform(std::size_t n_devices, std::size_t n_gateways, double payload_bits,
                              double max_power_device_w, double max_power_gateway_w);

  std::size_t n_devices() const { return payload_bits.size(); }
  std::size_t n_gateways() const { return max_power_gateway_w.size(); }

  /// Throws Error(Config) on any violated positivity / range requirement.
  void validate() const;
  void validate(std::size_t n_devices, std::size_t n_gateways) const;
};

}  // namespace m2m
