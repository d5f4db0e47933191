#pragma once

#include <string>

#include <json.hpp>

#include "m2m/energy.hpp"
#include "m2m/ipcta.hpp"
#include "m2m/noma_analytic.hpp"
#include "m2m/topology.hpp"

namespace m2m {

nlohmann::json to_json(const NetworkTopology& topo);
nlohmann::json to_json(const Allocation& alloc);
nlohmann::json to_json(const EnergyReport& report);
nlohmann::json to_json(const ViolationReport& report);
nlohmann::json to_json(const UpperTimeBound& bound, const NetworkTopology& topo);

/// Reads an allocation written by to_json. Throws Parse on missing fields.
Allocation allocation_from_json(const nlohmann::json& j);

/// One JSON object per trace entry, newline separated.
std::string trace_jsonl(const SolveTrace& trace);

}  // namespace m2m
