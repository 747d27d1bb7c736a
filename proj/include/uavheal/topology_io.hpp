#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavheal/channel.hpp"
#include "uavheal/sim.hpp"
#include "uavheal/swarm_graph.hpp"

namespace uavheal {

// CSV with header "index,x,y,z", one row per uav, meters.
std::string topology_to_csv(const Topology& topology);
Topology topology_from_csv(const std::string& text);

// {"rows": [{"index": i, "position": [x, y, z]}, ...]}
nlohmann::json topology_to_json(const Topology& topology);
Topology topology_from_json(const nlohmann::json& j);

Topology load_topology(const std::filesystem::path& path);  // by extension: .csv or .json
void save_topology(const Topology& topology, const std::filesystem::path& path);

// Link rule from a config object:
//   {"override_m": 120}                      plain threshold
//   {"physical": true, ...ChannelParams...}  full channel model
// Missing object means the 120 m default.
LinkModel link_from_json(const nlohmann::json& j);
ChannelParams channel_from_json(const nlohmann::json& j);

// Scenario file: initial topology inline ("initial": {...rows}) or by path
// ("initial_csv": "file.csv", relative to the scenario file), "events":
// [{"t": 10, "destroyed": [..]}], "horizon", "speed", "inertia", "seed".
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json scenario_to_json(const Scenario& scenario);

std::string read_text(const std::filesystem::path& path);
// Throws Io when the file cannot be opened or written.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace uavheal
