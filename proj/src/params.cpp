#include "m2m/params.hpp"

#include <string>

#include "m2m/error.hpp"

namespace m2m {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::InfeasibleTime: return "infeasible_time";
    case ErrorKind::Unbounded: return "unbounded";
    case ErrorKind::StartInfeasible: return "start_infeasible";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Inconsistent: return "inconsistent";
    case ErrorKind::Timeout: return "timeout";
  }
  return "unknown";
}

SystemParams SystemParams::uniform(std::size_t n_devices, std::size_t n_gateways,
                                   double payload_bits, double max_power_device_w,
                                   double max_power_gateway_w) {
  SystemParams p;
  p.payload_bits.assign(n_devices, payload_bits);
  p.max_power_device_w.assign(n_devices, max_power_device_w);
  p.max_power_gateway_w.assign(n_gateways, max_power_gateway_w);
  return p;
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::Config, what);
}

}  // namespace

void SystemParams::validate() const {
  require(bandwidth_hz > 0, "bandwidth must be positive");
  require(noise_w > 0, "noise power must be positive");
  require(pa_eff_device > 0 && pa_eff_device <= 1, "device PA efficiency must lie in (0, 1]");
  require(pa_eff_gateway > 0 && pa_eff_gateway <= 1, "gateway PA efficiency must lie in (0, 1]");
  require(circuit_device_w >= 0, "device circuit power must be non-negative");
  require(circuit_gateway_w >= 0, "gateway circuit power must be non-negative");
  require(deadline_s > 0, "deadline must be positive");
  require(eh.a > 0 && eh.b > 0 && eh.saturation_w > 0 && eh.threshold_w > 0,
          "harvester constants a, b, M, P0 must be positive");
  require(max_power_device_w.size() == payload_bits.size(),
          "device power caps and payloads differ in length");
  for (double d : payload_bits) require(d > 0, "all payloads must be positive");
  for (double p : max_power_device_w) require(p > 0, "device power caps must be positive");
  for (double q : max_power_gateway_w) require(q > 0, "gateway power caps must be positive");
}

void SystemParams::validate(std::size_t n_devices, std::size_t n_gateways) const {
  validate();
  if (payload_bits.size() != n_devices || max_power_gateway_w.size() != n_gateways)
    fail(ErrorKind::Dimension, "system parameters sized for " +
                                   std::to_string(payload_bits.size()) + " devices / " +
                                   std::to_string(max_power_gateway_w.size()) +
                                   " gateways, topology has " + std::to_string(n_devices) + " / " +
                                   std::to_string(n_gateways));
}

}  // namespace m2m
