#include "m2m/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "m2m/error.hpp"

namespace m2m {

using nlohmann::json;

namespace {

struct UnitDef {
  Dimension dim;
  double scale;
  bool log_power = false;  // dBm / dBW
};

const std::map<std::string, UnitDef, std::less<>>& units() {
  static const std::map<std::string, UnitDef, std::less<>> table{
      {"W", {Dimension::Power, 1.0}},           {"mW", {Dimension::Power, 1e-3}},
      {"uW", {Dimension::Power, 1e-6}},         {"kW", {Dimension::Power, 1e3}},
      {"dBm", {Dimension::Power, 1e-3, true}},  {"dBW", {Dimension::Power, 1.0, true}},
      {"Hz", {Dimension::Frequency, 1.0}},      {"kHz", {Dimension::Frequency, 1e3}},
      {"MHz", {Dimension::Frequency, 1e6}},     {"bit", {Dimension::Bits, 1.0}},
      {"bits", {Dimension::Bits, 1.0}},         {"kbit", {Dimension::Bits, 1e3}},
      {"kbits", {Dimension::Bits, 1e3}},        {"Kbits", {Dimension::Bits, 1e3}},
      {"Mbit", {Dimension::Bits, 1e6}},         {"s", {Dimension::Time, 1.0}},
      {"ms", {Dimension::Time, 1e-3}},          {"us", {Dimension::Time, 1e-6}},
      {"km", {Dimension::Distance, 1.0}},       {"m", {Dimension::Distance, 1e-3}},
      {"dB", {Dimension::Decibel, 1.0}},        {"1/W", {Dimension::InversePower, 1.0}},
      {"1/mW", {Dimension::InversePower, 1e3}},
  };
  return table;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

[[noreturn]] void bad_value(std::string_view key, const std::string& what) {
  fail(ErrorKind::Parse, key.empty() ? what : "'" + std::string(key) + "': " + what);
}

}  // namespace

double parse_quantity(std::string_view text, Dimension dim, std::string_view key) {
  const std::string s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc()) bad_value(key, "expected a number, got '" + s + "'");
  const std::string unit = trim(std::string_view(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr)));
  if (unit.empty()) return value;
  const auto it = units().find(unit);
  if (it == units().end()) bad_value(key, "unknown unit '" + unit + "'");
  const UnitDef& u = it->second;
  if (u.dim != dim) bad_value(key, "unit '" + unit + "' does not fit this quantity");
  if (u.log_power) return u.scale * std::pow(10.0, value / 10.0);
  return value * u.scale;
}

namespace {

double quantity(const json& v, Dimension dim, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_quantity(v.get<std::string>(), dim, key);
  bad_value(key, "expected a number or a string with a unit");
}

std::size_t count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) bad_value(key, "expected a non-negative integer");
  return v.get<std::size_t>();
}

// Line and column of a byte offset (1-based).
std::pair<std::size_t, std::size_t> locate(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

using Setter = std::function<void(Scenario&, const json&, const std::string&)>;

Setter number(double Scenario::*field, Dimension dim) {
  return [field, dim](Scenario& s, const json& v, const std::string& k) { s.*field = quantity(v, dim, k); };
}
Setter param(double SystemParams::*field, Dimension dim) {
  return [field, dim](Scenario& s, const json& v, const std::string& k) {
    s.params.*field = quantity(v, dim, k);
  };
}
Setter eh(double EhModel::*field, Dimension dim) {
  return [field, dim](Scenario& s, const json& v, const std::string& k) {
    s.params.eh.*field = quantity(v, dim, k);
  };
}
Setter geo(double GeometryConfig::*field, Dimension dim) {
  return [field, dim](Scenario& s, const json& v, const std::string& k) {
    s.geometry.*field = quantity(v, dim, k);
  };
}
Setter geo_count(std::size_t GeometryConfig::*field) {
  return [field](Scenario& s, const json& v, const std::string& k) { s.geometry.*field = count(v, k); };
}

const std::map<std::string, Setter, std::less<>>& top_level() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"bandwidth_hz", param(&SystemParams::bandwidth_hz, Dimension::Frequency)},
      {"noise_w", param(&SystemParams::noise_w, Dimension::Power)},
      {"pa_eff_device", param(&SystemParams::pa_eff_device, Dimension::None)},
      {"pa_eff_gateway", param(&SystemParams::pa_eff_gateway, Dimension::None)},
      {"circuit_device_w", param(&SystemParams::circuit_device_w, Dimension::Power)},
      {"circuit_gateway_w", param(&SystemParams::circuit_gateway_w, Dimension::Power)},
      {"deadline_s", param(&SystemParams::deadline_s, Dimension::Time)},
      {"eh_a", eh(&EhModel::a, Dimension::InversePower)},
      {"eh_b", eh(&EhModel::b, Dimension::Power)},
      {"eh_sat_w", eh(&EhModel::saturation_w, Dimension::Power)},
      {"eh_threshold_w", eh(&EhModel::threshold_w, Dimension::Power)},
      {"payload_bits", number(&Scenario::payload_bits, Dimension::Bits)},
      {"max_power_device_w", number(&Scenario::max_power_device_w, Dimension::Power)},
      {"max_power_gateway_w", number(&Scenario::max_power_gateway_w, Dimension::Power)},
      {"seed",
       [](Scenario& s, const json& v, const std::string& k) {
         if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
           bad_value(k, "expected a non-negative integer");
         s.seed = v.get<std::uint64_t>();
       }},
  };
  return table;
}

const std::map<std::string, Setter, std::less<>>& geometry_keys() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"n_devices", geo_count(&GeometryConfig::n_devices)},
      {"n_gateways", geo_count(&GeometryConfig::n_gateways)},
      {"n_clusters", geo_count(&GeometryConfig::n_clusters)},
      {"max_group_size", geo_count(&GeometryConfig::max_group_size)},
      {"max_cluster_size", geo_count(&GeometryConfig::max_cluster_size)},
      {"placement",
       [](Scenario& s, const json& v, const std::string& k) {
         const std::string p = v.is_string() ? v.get<std::string>() : "";
         if (p == "clustered")
           s.geometry.placement = Placement::Clustered;
         else if (p == "uniform")
           s.geometry.placement = Placement::Uniform;
         else
           bad_value(k, "expected \"clustered\" or \"uniform\"");
       }},
      {"cell_radius_km", geo(&GeometryConfig::cell_radius_km, Dimension::Distance)},
      {"gateway_ring_km", geo(&GeometryConfig::gateway_ring_km, Dimension::Distance)},
      {"gateway_ring_jitter_km", geo(&GeometryConfig::gateway_ring_jitter_km, Dimension::Distance)},
      {"device_min_distance_km", geo(&GeometryConfig::device_min_distance_km, Dimension::Distance)},
      {"device_max_distance_km", geo(&GeometryConfig::device_max_distance_km, Dimension::Distance)},
      {"shadowing_std_db", geo(&GeometryConfig::shadowing_std_db, Dimension::Decibel)},
  };
  return table;
}

void apply(Scenario& s, const json& obj, const std::map<std::string, Setter, std::less<>>& table,
           const std::string& prefix) {
  for (const auto& [key, value] : obj.items()) {
    const std::string path = prefix + key;
    if (prefix.empty() && key == "geometry") {
      if (!value.is_object()) bad_value(path, "expected an object");
      apply(s, value, geometry_keys(), "geometry.");
      continue;
    }
    const auto it = table.find(key);
    if (it == table.end()) fail(ErrorKind::Parse, "unknown key '" + path + "'");
    it->second(s, value, path);
  }
}

}  // namespace

SystemParams Scenario::system() const {
  SystemParams p = params;
  p.payload_bits.assign(geometry.n_devices, payload_bits);
  p.max_power_device_w.assign(geometry.n_devices, max_power_device_w);
  p.max_power_gateway_w.assign(geometry.n_gateways, max_power_gateway_w);
  return p;
}

void Scenario::validate() const {
  geometry.validate();
  system().validate(geometry.n_devices, geometry.n_gateways);
}

Scenario parse_scenario(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    const auto [line, col] = locate(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (const auto at = msg.find("syntax error"); at != std::string::npos) msg = msg.substr(at);
    fail(ErrorKind::Parse, std::string(source) + ":" + std::to_string(line) + ":" +
                               std::to_string(col) + ": " + msg);
  }
  if (!doc.is_object()) fail(ErrorKind::Parse, std::string(source) + ": top level must be an object");
  Scenario s;
  try {
    apply(s, doc, top_level(), "");
  } catch (const Error& e) {
    fail(ErrorKind::Parse, std::string(source) + ": " + e.what());
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

std::string dump_scenario(const Scenario& s) {
  const auto& p = s.params;
  const auto& g = s.geometry;
  json j{
      {"bandwidth_hz", p.bandwidth_hz},
      {"noise_w", p.noise_w},
      {"pa_eff_device", p.pa_eff_device},
      {"pa_eff_gateway", p.pa_eff_gateway},
      {"circuit_device_w", p.circuit_device_w},
      {"circuit_gateway_w", p.circuit_gateway_w},
      {"deadline_s", p.deadline_s},
      {"eh_a", p.eh.a},
      {"eh_b", p.eh.b},
      {"eh_sat_w", p.eh.saturation_w},
      {"eh_threshold_w", p.eh.threshold_w},
      {"payload_bits", s.payload_bits},
      {"max_power_device_w", s.max_power_device_w},
      {"max_power_gateway_w", s.max_power_gateway_w},
      {"seed", s.seed},
      {"geometry",
       {{"n_devices", g.n_devices},
        {"n_gateways", g.n_gateways},
        {"n_clusters", g.n_clusters},
        {"max_group_size", g.max_group_size},
        {"max_cluster_size", g.max_cluster_size},
        {"placement", g.placement == Placement::Clustered ? "clustered" : "uniform"},
        {"cell_radius_km", g.cell_radius_km},
        {"gateway_ring_km", g.gateway_ring_km},
        {"gateway_ring_jitter_km", g.gateway_ring_jitter_km},
        {"device_min_distance_km", g.device_min_distance_km},
        {"device_max_distance_km", g.device_max_distance_km},
        {"shadowing_std_db", g.shadowing_std_db}}},
  };
  return j.dump(2);
}

}  // namespace m2m
