#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "m2m/params.hpp"
#include "m2m/topology.hpp"

namespace m2m {

/// Physical dimension of a configurable quantity; decides which unit
/// suffixes are accepted.
enum class Dimension { None, Power, Frequency, Bits, Time, Distance, Decibel, InversePower };

/// Converts "5 mW", "-104 dBm", "18kHz", "10 kbit", "300 m" or a bare number
/// (already in the base unit of `dim`: W, Hz, bit, s, km, dB, 1/W) to the
/// base unit. Throws Parse naming `key` on an unknown or mismatched unit.
double parse_quantity(std::string_view text, Dimension dim, std::string_view key = {});

/// Every input of one experiment: system constants, per-node values (uniform
/// across nodes), geometry and the topology seed.
struct Scenario {
  SystemParams params;  // per-node vectors are filled by system()
  double payload_bits = 1e4;
  double max_power_device_w = 5e-3;
  double max_power_gateway_w = 1.0;
  GeometryConfig geometry;
  std::uint64_t seed = 0;

  /// Params with the per-node vectors sized for the geometry.
  SystemParams system() const;
  NetworkTopology topology() const { return generate_topology(geometry, seed); }
  void validate() const;
};

/// Reads a JSON object of overrides on top of the defaults. Numbers are in
/// SI (distances in km, shadowing in dB); strings may carry a unit suffix.
/// Syntax errors report line and column; unknown keys are rejected.
Scenario parse_scenario(std::string_view text, std::string_view source = "<config>");
Scenario load_scenario(const std::filesystem::path& path);
/// Canonical JSON of every field in SI.
std::string dump_scenario(const Scenario& s);

}  // namespace m2m
