#pragma once

// Scenario JSON reading/writing.
//
// {
//   "dt": 0.1, "history_horizon": 1.0, "future_horizon": 8.0, "ego_id": "ego",
//   "map": {"lanes": [[[x, y], ...], ...], "drivable": [[[x, y], ...], ...]},
//   "agents": [{"id": "a", "length": 4.8, "width": 2.0,
//               "states": [{"t": 0.0, "x": 0.0, "y": 0.0, "heading": 0.0, "speed": 10.0}, ...]}]
// }
//
// An optional top-level "id" names the scenario; load_scenario falls back to the file stem.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "advsim/scenario.hpp"

namespace advsim {

using json = nlohmann::json;

namespace io_detail {

inline const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "/" + key, "missing field");
  return *it;
}

inline double number(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw ParseError(path + "/" + key, "expected a number");
  return v.get<double>();
}

inline std::string string(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ParseError(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

inline const json& array(const json& obj, const char* key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_array()) throw ParseError(path + "/" + key, "expected an array");
  return v;
}

inline Polyline polyline_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array of [x, y] points");
  Polyline out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& pt = j[i];
    const std::string p = path + "/" + std::to_string(i);
    if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
      throw ParseError(p, "expected [x, y]");
    out.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  return out;
}

inline json polyline_to_json(const Polyline& line) {
  json out = json::array();
  for (const auto& p : line) out.push_back(json::array({p.x, p.y}));
  return out;
}

}  // namespace io_detail

inline json pose_to_json(const Pose& p) {
  return json{{"t", p.t}, {"x", p.x}, {"y", p.y}, {"heading", p.heading}, {"speed", p.speed}};
}

inline Pose pose_from_json(const json& j, const std::string& path) {
  using namespace io_detail;
  return Pose{number(j, "t", path), number(j, "x", path), number(j, "y", path), number(j, "heading", path),
              number(j, "speed", path)};
}

inline json poses_to_json(const std::vector<Pose>& poses) {
  json out = json::array();
  for (const auto& p : poses) out.push_back(pose_to_json(p));
  return out;
}

inline std::vector<Pose> poses_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array of poses");
  std::vector<Pose> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(pose_from_json(j[i], path + "/" + std::to_string(i)));
  return out;
}

inline json scenario_to_json(const Scenario& s) {
  json lanes = json::array();
  for (const auto& l : s.map.lane_centerlines) lanes.push_back(io_detail::polyline_to_json(l));
  json drivable = json::array();
  for (const auto& p : s.map.drivable_polygons) drivable.push_back(io_detail::polyline_to_json(p));
  json agents = json::array();
  for (const auto& tr : s.tracks)
    agents.push_back({{"id", tr.id}, {"length", tr.length}, {"width", tr.width}, {"states", poses_to_json(tr.states)}});
  json out{{"dt", s.dt},
           {"history_horizon", s.history_horizon},
           {"future_horizon", s.future_horizon},
           {"ego_id", s.ego_id},
           {"map", {{"lanes", lanes}, {"drivable", drivable}}},
           {"agents", agents}};
  if (!s.id.empty()) out["id"] = s.id;
  return out;
}

// Parses and validates. Schema problems raise ParseError; invariant breaks raise ValidationError.
inline Scenario scenario_from_json(const json& j, const std::string& fallback_id = {}) {
  using namespace io_detail;
  Scenario s;
  if (!j.is_object()) throw ParseError("", "top level must be an object");
  s.dt = number(j, "dt", "");
  s.history_horizon = number(j, "history_horizon", "");
  s.future_horizon = number(j, "future_horizon", "");
  s.ego_id = string(j, "ego_id", "");
  if (auto it = j.find("id"); it != j.end()) {
    if (!it->is_string()) throw ParseError("/id", "expected a string");
    s.id = it->get<std::string>();
  } else {
    s.id = fallback_id;
  }
  const json& map = require(j, "map", "");
  const json& lanes = array(map, "lanes", "/map");
  for (std::size_t i = 0; i < lanes.size(); ++i)
    s.map.lane_centerlines.push_back(polyline_from_json(lanes[i], "/map/lanes/" + std::to_string(i)));
  const json& drivable = array(map, "drivable", "/map");
  for (std::size_t i = 0; i < drivable.size(); ++i)
    s.map.drivable_polygons.push_back(polyline_from_json(drivable[i], "/map/drivable/" + std::to_string(i)));
  const json& agents = array(j, "agents", "");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string path = "/agents/" + std::to_string(i);
    AgentTrack tr;
    tr.id = string(agents[i], "id", path);
    tr.length = number(agents[i], "length", path);
    tr.width = number(agents[i], "width", path);
    tr.states = poses_from_json(array(agents[i], "states", path), path + "/states");
    s.tracks.push_back(std::move(tr));
  }
  validate(s);
  return s;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorClass::data, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorClass::runtime, "cannot write '" + path.string() + "'");
  out << text;
}

inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(parse_json_text(read_text_file(path), path.string()), path.stem().string());
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  write_text_file(path, scenario_to_json(s).dump(1) + "\n");
}

// All *.json scenario files of a corpus directory, sorted by file name.
inline std::vector<Scenario> load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorClass::data, "corpus '" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_scenario(f));
  return out;
}

}  // namespace advsim
