#pragma once

// World-state data model: map, agent tracks, trajectories, and the validation
// rules every downstream module relies on.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "advsim/error.hpp"
#include "advsim/vec2.hpp"

namespace advsim {

inline constexpr double kTimeEps = 1e-6;

struct Pose {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // (-pi, pi]
  double speed = 0.0;    // >= 0

  Vec2 position() const { return {x, y}; }
  Vec2 velocity() const { return unit_from_heading(heading) * speed; }
  bool operator==(const Pose&) const = default;
};

using Polyline = std::vector<Vec2>;

struct MapGraph {
  std::vector<Polyline> lane_centerlines;
  std::vector<Polyline> drivable_polygons;
  bool operator==(const MapGraph&) const = default;
};

struct AgentTrack {
  std::string id;
  double length = 4.8;
  double width = 2.0;
  std::vector<Pose> states;
  bool operator==(const AgentTrack&) const = default;
};

struct Scenario {
  std::string id;  // optional in files; defaults to the file stem
  double dt = 0.1;
  double history_horizon = 1.0;
  double future_horizon = 8.0;
  std::string ego_id;
  MapGraph map;
  std::vector<AgentTrack> tracks;

  bool operator==(const Scenario&) const = default;

  const AgentTrack* find_track(const std::string& agent_id) const {
    for (const auto& tr : tracks)
      if (tr.id == agent_id) return &tr;
    return nullptr;
  }

  const AgentTrack& track(const std::string& agent_id) const {
    if (const auto* tr = find_track(agent_id)) return *tr;
    throw ValidationError(agent_id, 0.0, "unknown agent_id");
  }

  const AgentTrack& ego() const { return track(ego_id); }

  double start_time() const {
    double t = INFINITY;
    for (const auto& tr : tracks)
      if (!tr.states.empty()) t = std::min(t, tr.states.front().t);
    return t;
  }

  double end_time() const {
    double t = -INFINITY;
    for (const auto& tr : tracks)
      if (!tr.states.empty()) t = std::max(t, tr.states.back().t);
    return t;
  }
};

struct TrajectoryHypothesis {
  std::vector<Pose> poses;
  double probability = 1.0;
  bool operator==(const TrajectoryHypothesis&) const = default;
};

// Integer step index of `t` on a grid of spacing `dt` anchored at 0.
inline long grid_index(double t, double dt) { return std::lround(t / dt); }

inline bool on_grid(double t, double dt) {
  const double k = t / dt;
  return std::abs(k - std::round(k)) <= kTimeEps * std::max(1.0, std::abs(k));
}

// Pose whose timestamp coincides with `t` on the grid, if the track has one.
inline std::optional<Pose> pose_at(const std::vector<Pose>& states, double t, double dt) {
  if (states.empty()) return std::nullopt;
  const long want = grid_index(t, dt);
  const long first = grid_index(states.front().t, dt);
  const long offset = want - first;
  if (offset >= 0 && offset < static_cast<long>(states.size()) && grid_index(states[offset].t, dt) == want)
    return states[offset];
  // Tracks with gaps: fall back to a binary search.
  auto it = std::lower_bound(states.begin(), states.end(), t - 0.5 * dt,
                             [](const Pose& p, double v) { return p.t < v; });
  if (it != states.end() && grid_index(it->t, dt) == want) return *it;
  return std::nullopt;
}

namespace detail {

inline bool finite(double v) { return std::isfinite(v); }

inline void validate_polyline(const Polyline& line, const std::string& what) {
  if (line.size() < 2) throw ValidationError(what + " has fewer than 2 points");
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (!finite(line[i].x) || !finite(line[i].y)) throw ValidationError(what + " has a non-finite point");
    if (i > 0 && line[i] == line[i - 1]) throw ValidationError(what + " repeats a consecutive point");
  }
}

inline bool polygon_is_simple(const Polyline& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share a vertex by construction.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(a, b, poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

}  // namespace detail

inline void validate_pose(const AgentTrack& track, const Pose& p) {
  if (!detail::finite(p.t) || !detail::finite(p.x) || !detail::finite(p.y) || !detail::finite(p.heading) ||
      !detail::finite(p.speed))
    throw ValidationError(track.id, p.t, "non-finite pose field");
  if (p.heading <= -std::numbers::pi || p.heading > std::numbers::pi)
    throw ValidationError(track.id, p.t, "heading not normalized to (-pi, pi]");
  if (p.speed < 0.0) throw ValidationError(track.id, p.t, "negative speed");
}

inline void validate_map(const MapGraph& map) {
  for (std::size_t i = 0; i < map.lane_centerlines.size(); ++i)
    detail::validate_polyline(map.lane_centerlines[i], "lane " + std::to_string(i));
  for (std::size_t i = 0; i < map.drivable_polygons.size(); ++i) {
    const auto& poly = map.drivable_polygons[i];
    const std::string name = "drivable polygon " + std::to_string(i);
    if (poly.size() < 3) throw ValidationError(name + " has fewer than 3 points");
    detail::validate_polyline(poly, name);
    if (!detail::polygon_is_simple(poly)) throw ValidationError(name + " is self-intersecting");
  }
}

// Throws ValidationError on the first broken invariant.
inline void validate(const Scenario& s) {
  if (!(s.dt > 0.0) || !detail::finite(s.dt)) throw ValidationError("dt must be a positive finite number");
  if (!(s.history_horizon >= 0.0) || !detail::finite(s.history_horizon))
    throw ValidationError("history_horizon must be >= 0");
  if (!(s.future_horizon >= 0.0) || !detail::finite(s.future_horizon))
    throw ValidationError("future_horizon must be >= 0");
  validate_map(s.map);

  std::set<std::string> ids;
  int ego_hits = 0;
  for (const auto& tr : s.tracks) {
    if (tr.id.empty()) throw ValidationError("agent with empty id");
    if (!ids.insert(tr.id).second) throw ValidationError(tr.id, 0.0, "duplicate agent_id");
    if (!(tr.length > 0.0) || !(tr.width > 0.0) || !detail::finite(tr.length) || !detail::finite(tr.width))
      throw ValidationError(tr.id, 0.0, "length and width must be positive");
    if (tr.states.empty()) throw ValidationError(tr.id, 0.0, "track has no states");
    if (tr.id == s.ego_id) ++ego_hits;
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
      const Pose& p = tr.states[i];
      validate_pose(tr, p);
      if (!on_grid(p.t, s.dt)) throw ValidationError(tr.id, p.t, "timestamp off the dt grid");
      if (i > 0 && !(p.t > tr.states[i - 1].t + 0.5 * s.dt))
        throw ValidationError(tr.id, p.t, "timestamps not strictly increasing");
    }
  }
  if (ego_hits != 1) throw ValidationError("ego_id '" + s.ego_id + "' does not resolve to exactly one track");
}

// Observation at `t_now`: states with t <= t_now, at most `history_horizon` back.
inline Scenario slice_observation(const Scenario& s, double t_now) {
  if (t_now < s.start_time() - kTimeEps)
    throw InsufficientDataError("empty history: t_now=" + std::to_string(t_now) + " precedes first sample");
  Scenario out;
  out.id = s.id;
  out.dt = s.dt;
  out.history_horizon = s.history_horizon;
  out.future_horizon = s.future_horizon;
  out.ego_id = s.ego_id;
  out.map = s.map;
  const long hi = grid_index(t_now, s.dt);
  const long lo = grid_index(t_now - s.history_horizon, s.dt);
  for (const auto& tr : s.tracks) {
    AgentTrack kept{tr.id, tr.length, tr.width, {}};
    for (const auto& p : tr.states) {
      const long k = grid_index(p.t, s.dt);
      if (k >= lo && k <= hi) kept.states.push_back(p);
    }
    if (!kept.states.empty()) out.tracks.push_back(std::move(kept));
  }
  if (!out.find_track(s.ego_id)) throw InsufficientDataError("empty history for ego at t_now=" + std::to_string(t_now));
  return out;
}

}  // namespace advsim
