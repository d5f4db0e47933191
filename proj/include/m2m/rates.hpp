#pragma once

#include <cstddef>
#include <vector>

#include "m2m/params.hpp"
#include "m2m/topology.hpp"

namespace m2m {

/// Bits delivered by the transmitter at `position` of a SIC-ordered link set
/// during `time_s`. Later entries interfere, earlier ones are cancelled.
double sic_rate(const std::vector<double>& gains, const std::vector<double>& powers,
                std::size_t position, double time_s, double bandwidth_hz, double noise_w);

/// Uplink bits of `device` to `gateway` in the gateway's NOMA phase, with
/// interference from the devices decoded after it. `p` is indexed by device.
double noma_device_rate(const NetworkTopology& topo, const SystemParams& params,
                        std::size_t gateway, std::size_t device, const std::vector<double>& p,
                        double time_s);

/// Bits delivered by `gateway` to the base station during the phase of its
/// cluster. `q` is indexed by gateway.
double noma_gateway_rate(const NetworkTopology& topo, const SystemParams& params,
                         std::size_t cluster, std::size_t gateway, const std::vector<double>& q,
                         double time_s);

/// Interference-free Shannon bits B t log2(1 + h2 p / noise).
double tdma_rate(double gain, double power_w, double time_s, const SystemParams& params);

}  // namespace m2m
