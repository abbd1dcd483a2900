#pragma once

#include <string>

#include "irsfd/types.hpp"

namespace irsfd {

/// Parses a scenario from JSON text. Every key is optional; missing keys
/// keep the value of the base scenario named by the top-level "base" key
/// ("desk" by default, or "full"). See README for the schema.
ScenarioConfig parse_scenario(const std::string& json_text);

/// Reads and parses a scenario file.
ScenarioConfig load_scenario(const std::string& path);

/// Serialises every field explicitly (powers in dBm/dB, as in the file schema).
std::string scenario_to_json(const ScenarioConfig& cfg);

}  // namespace irsfd
