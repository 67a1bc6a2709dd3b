#pragma once

// Converter from a Waymo-motion-style JSON record (the protobuf JSON mapping of a
// Scenario message) to the native scenario schema.
//
//   scenarioId               -> id
//   timestampsSeconds[i]     -> t, rebased so the first timestamp is 0
//   currentTimeIndex         -> history_horizon = timestamps[current] - timestamps[0]
//   sdcTrackIndex            -> ego_id (the track's id)
//   tracks[].id              -> agent id (numbers become strings)
//   tracks[].states[i]       -> pose; invalid states are dropped,
//                               heading normalized, speed = |(velocityX, velocityY)|
//   tracks[].states[*].length/width -> first valid state's box size
//   mapFeatures[].lane.polyline[{x, y, z}] -> lane centerline (z dropped)
//
// Road-edge polygons are not mapped, so the drivable area is left empty.

#include <cmath>
#include <string>

#include <json.hpp>

#include "advsim/error.hpp"
#include "advsim/geometry.hpp"
#include "advsim/scenario.hpp"

namespace advsim {

inline Scenario convert_motion_record(const nlohmann::json& j) {
  using nlohmann::json;
  try {
    Scenario s;
    s.id = j.at("scenarioId").get<std::string>();
    const auto ts = j.at("timestampsSeconds").get<std::vector<double>>();
    if (ts.size() < 2) throw ParseError("/timestampsSeconds", "needs at least two timestamps");
    const auto current = j.at("currentTimeIndex").get<std::size_t>();
    if (current >= ts.size()) throw ParseError("/currentTimeIndex", "out of range");
    s.dt = std::round((ts[1] - ts[0]) * 1000.0) / 1000.0;
    if (!(s.dt > 0.0)) throw ParseError("/timestampsSeconds", "timestamps must increase");
    s.history_horizon = std::round((ts[current] - ts[0]) / s.dt) * s.dt;
    s.future_horizon = std::round((ts.back() - ts[current]) / s.dt) * s.dt;

    const auto& tracks = j.at("tracks");
    const auto sdc = j.at("sdcTrackIndex").get<std::size_t>();
    if (sdc >= tracks.size()) throw ParseError("/sdcTrackIndex", "out of range");
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const auto& tj = tracks[i];
      AgentTrack tr;
      const auto& id = tj.at("id");
      tr.id = id.is_string() ? id.get<std::string>() : std::to_string(id.get<long long>());
      const auto& states = tj.at("states");
      bool sized = false;
      for (std::size_t k = 0; k < states.size() && k < ts.size(); ++k) {
        const auto& st = states[k];
        if (!st.value("valid", false)) continue;
        if (!sized) {
          tr.length = st.at("length").get<double>();
          tr.width = st.at("width").get<double>();
          sized = true;
        }
        const double vx = st.value("velocityX", 0.0);
        const double vy = st.value("velocityY", 0.0);
        const double t = std::round((ts[k] - ts[0]) / s.dt) * s.dt;
        tr.states.push_back({t, st.at("centerX").get<double>(), st.at("centerY").get<double>(),
                             normalize_angle(st.at("heading").get<double>()), std::hypot(vx, vy)});
      }
      if (i == sdc) s.ego_id = tr.id;
      if (!tr.states.empty()) s.tracks.push_back(std::move(tr));
    }

    if (auto it = j.find("mapFeatures"); it != j.end()) {
      for (const auto& f : *it) {
        auto lane = f.find("lane");
        if (lane == f.end()) continue;
        Polyline line;
        for (const auto& p : lane->at("polyline")) line.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
        line = dedupe_polyline(line, 1e-9);
        if (line.size() >= 2) s.map.lane_centerlines.push_back(std::move(line));
      }
    }
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw ParseError("/", e.what());
  }
}

}  // namespace advsim
