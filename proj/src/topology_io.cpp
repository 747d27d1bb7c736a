#include "uavheal/topology_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "uavheal/errors.hpp"
#include "uavheal/meta.hpp"

namespace uavheal {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double number_cell(const std::string& cell, std::size_t line_no) {
  try {
    return parse_exact_decimal(cell);
  } catch (const Error&) {
    throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": bad number '" + cell + "'");
  }
}

Topology from_rows(std::vector<std::pair<int, Vec3>> rows) {
  if (rows.empty()) throw Error(ErrorCode::Io, "topology has no rows");
  std::vector<int> idx;
  Positions p(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    idx.push_back(rows[r].first);
    p.row(static_cast<Eigen::Index>(r)) = rows[r].second.transpose();
  }
  try {
    return Topology(std::move(idx), std::move(p));
  } catch (const Error& e) {
    throw Error(ErrorCode::Io, std::string("invalid topology: ") + e.what());
  }
}

}  // namespace

std::string topology_to_csv(const Topology& topology) {
  std::string out = "index,x,y,z\n";
  for (std::size_t r = 0; r < topology.size(); ++r) {
    const Vec3 p = topology.position(r);
    out += std::to_string(topology.indices()[r]);
    for (int a = 0; a < 3; ++a) out += "," + exact_decimal(p[a]);
    out += "\n";
  }
  return out;
}

Topology topology_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<std::pair<int, Vec3>> rows;
  while (std::getline(ss, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (!header) {
      if (cells != std::vector<std::string>{"index", "x", "y", "z"})
        throw Error(ErrorCode::Io, "csv header must be index,x,y,z");
      header = true;
      continue;
    }
    if (cells.size() != 4) throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": expected 4 cells");
    const double index = number_cell(cells[0], line_no);
    if (index != static_cast<int>(index) || index < 1)
      throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": index must be a positive integer");
    rows.emplace_back(static_cast<int>(index),
                      Vec3(number_cell(cells[1], line_no), number_cell(cells[2], line_no), number_cell(cells[3], line_no)));
  }
  if (!header) throw Error(ErrorCode::Io, "empty csv");
  return from_rows(std::move(rows));
}

json topology_to_json(const Topology& topology) {
  json rows = json::array();
  for (std::size_t r = 0; r < topology.size(); ++r) {
    const Vec3 p = topology.position(r);
    rows.push_back({{"index", topology.indices()[r]}, {"position", {p.x(), p.y(), p.z()}}});
  }
  return json{{"rows", rows}};
}

Topology topology_from_json(const json& j) {
  try {
    std::vector<std::pair<int, Vec3>> rows;
    for (const auto& row : j.at("rows")) {
      const auto& pos = row.at("position");
      if (pos.size() != 3) throw Error(ErrorCode::Io, "position needs three coordinates");
      rows.emplace_back(row.at("index").get<int>(),
                        Vec3(pos[0].get<double>(), pos[1].get<double>(), pos[2].get<double>()));
    }
    return from_rows(std::move(rows));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, std::string("topology json: ") + e.what());
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Topology load_topology(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return topology_from_csv(read_text(path));
  if (ext == ".json") {
    try {
      return topology_from_json(json::parse(read_text(path)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Io, path.string() + ": " + e.what());
    }
  }
  throw Error(ErrorCode::Io, "topology files must end in .csv or .json");
}

void save_topology(const Topology& topology, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return write_text(path, topology_to_csv(topology));
  if (ext == ".json") return write_text(path, topology_to_json(topology).dump(1) + "\n");
  throw Error(ErrorCode::Io, "topology files must end in .csv or .json");
}

ChannelParams channel_from_json(const json& j) {
  ChannelParams p = ChannelParams::physical();
  try {
    p.transmit_power_dBm = j.value("transmit_power_dBm", p.transmit_power_dBm);
    p.receive_threshold_dBm = j.value("receive_threshold_dBm", p.receive_threshold_dBm);
    p.antenna_gain_rx_dBi = j.value("antenna_gain_rx_dBi", p.antenna_gain_rx_dBi);
    p.antenna_gain_tx_dBi = j.value("antenna_gain_tx_dBi", p.antenna_gain_tx_dBi);
    p.path_loss_exponent = j.value("path_loss_exponent", p.path_loss_exponent);
    p.carrier_freq_Hz = j.value("carrier_freq_Hz", p.carrier_freq_Hz);
    p.light_speed_m_s = j.value("light_speed_m_s", p.light_speed_m_s);
    p.scatter_strength = j.value("scatter_strength", p.scatter_strength);
    p.rice_factor = j.value("rice_factor", p.rice_factor);
    p.small_scale_enabled = j.value("small_scale_enabled", p.small_scale_enabled);
    if (j.contains("override_m")) p.clec_distance_override_m = j.at("override_m").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("channel config: ") + e.what());
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  return p;
}

LinkModel link_from_json(const json& j) {
  if (j.is_null()) return LinkModel::threshold(120.0);
  if (!j.is_object()) throw Error(ErrorCode::Config, "link config must be an object");
  try {
    if (j.value("physical", false)) return LinkModel::channel(channel_from_json(j));
    return LinkModel::threshold(j.value("override_m", 120.0));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("link config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    throw Error(ErrorCode::Config, e.what());
  }
}

Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir) {
  Scenario s;
  try {
    if (j.contains("initial")) {
      s.initial = topology_from_json(j.at("initial"));
    } else if (j.contains("initial_csv")) {
      std::filesystem::path p = j.at("initial_csv").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      s.initial = topology_from_csv(read_text(p));
    } else {
      throw Error(ErrorCode::Config, "scenario needs 'initial' or 'initial_csv'");
    }
    for (const auto& ev : j.value("events", json::array())) {
      UedEvent e{ev.at("t").get<int>(), ev.at("destroyed").get<std::vector<int>>()};
      std::sort(e.destroyed.begin(), e.destroyed.end());
      s.schedule.push_back(std::move(e));
    }
    s.horizon = j.value("horizon", s.horizon);
    s.speed_m_per_step = j.value("speed", s.speed_m_per_step);
    s.inertia_steps = j.value("inertia", s.inertia_steps);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("scenario: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    throw Error(ErrorCode::Config, std::string("scenario: ") + e.what());
  }
  return s;
}

json scenario_to_json(const Scenario& scenario) {
  json events = json::array();
  for (const auto& e : scenario.schedule) events.push_back({{"t", e.time_step}, {"destroyed", e.destroyed}});
  return json{{"initial", topology_to_json(scenario.initial)},
              {"events", events},
              {"horizon", scenario.horizon},
              {"speed", scenario.speed_m_per_step},
              {"inertia", scenario.inertia_steps},
              {"seed", scenario.seed}};
}

}  // namespace uavheal
