#pragma once

// Synthetic scenes: the 20-scenario evaluation corpus, a separable training
// corpus for the opponent scorer, and small named fixtures. Every log is
// collision-free and sampled at 10 Hz over 9 s (1 s history, 8 s future).

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "advsim/geometry.hpp"
#include "advsim/random.hpp"
#include "advsim/scenario.hpp"

namespace advsim::fixtures {

inline constexpr double kDt = 0.1;
inline constexpr double kHistory = 1.0;
inline constexpr double kFuture = 8.0;
inline constexpr double kDuration = kHistory + kFuture;
inline constexpr double kLaneWidth = 3.5;

// Longitudinal acceleration as a function of time.
using AccelProfile = std::function<double(double)>;

inline AccelProfile cruise() {
  return [](double) { return 0.0; };
}

// Constant acceleration `a` from `t_from` on.
inline AccelProfile accel_after(double t_from, double a) {
  return [=](double t) { return t >= t_from - kTimeEps ? a : 0.0; };
}

// Constant acceleration `a` on [t_from, t_to).
inline AccelProfile accel_between(double t_from, double t_to, double a) {
  return [=](double t) { return t >= t_from - kTimeEps && t < t_to - kTimeEps ? a : 0.0; };
}

inline Polyline straight(Vec2 a, Vec2 b) { return {a, b}; }

// Track driven along `path` from arc length s0 at speed v0, integrated at dt.
inline AgentTrack track_along(std::string id, const Polyline& path, double s0, double v0, const AccelProfile& accel,
                              double t_begin = 0.0, double t_end = kDuration, double dt = kDt) {
  const ArcLengthPath p(path);
  AgentTrack tr;
  tr.id = std::move(id);
  double s = s0;
  double v = v0;
  const long n0 = grid_index(t_begin, dt);
  const long n1 = grid_index(t_end, dt);
  for (long n = n0; n <= n1; ++n) {
    const double t = n * dt;
    const Vec2 pos = p.point_at(s);
    tr.states.push_back({t, pos.x, pos.y, normalize_angle(p.heading_at(s)), v});
    const double a = accel(t);
    const double v_next = std::max(0.0, v + a * dt);
    s += (v + a * dt < 0.0) ? v * v / (-2.0 * a) : 0.5 * (v + v_next) * dt;
    v = v_next;
  }
  return tr;
}

inline Scenario make_scenario(std::string id, MapGraph map, std::vector<AgentTrack> tracks,
                              std::string ego_id = "ego") {
  Scenario s;
  s.id = std::move(id);
  s.dt = kDt;
  s.history_horizon = kHistory;
  s.future_horizon = kFuture;
  s.ego_id = std::move(ego_id);
  s.map = std::move(map);
  s.tracks = std::move(tracks);
  validate(s);
  return s;
}

inline Polyline rectangle(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}; }

// Eastbound lanes at y = 0, 3.5, ... plus a distant parallel road for bystanders.
inline MapGraph highway_map(int lanes, double x0 = -200.0, double x1 = 600.0) {
  MapGraph m;
  for (int i = 0; i < lanes; ++i) m.lane_centerlines.push_back(straight({x0, i * kLaneWidth}, {x1, i * kLaneWidth}));
  m.lane_centerlines.push_back(straight({x0, 80.0}, {x1, 80.0}));
  m.drivable_polygons.push_back(rectangle(x0, -0.5 * kLaneWidth, x1, (lanes - 0.5) * kLaneWidth));
  m.drivable_polygons.push_back(rectangle(x0, 80.0 - 0.5 * kLaneWidth, x1, 80.0 + 0.5 * kLaneWidth));
  return m;
}

// Eastbound/westbound road crossed at x = xc by a northbound/southbound road.
inline MapGraph intersection_map(double xc) {
  MapGraph m;
  m.lane_centerlines = {straight({-200.0, 0.0}, {600.0, 0.0}), straight({600.0, kLaneWidth}, {-200.0, kLaneWidth}),
                        straight({xc, -300.0}, {xc, 300.0}), straight({xc - kLaneWidth, 300.0}, {xc - kLaneWidth, -300.0}),
                        straight({-200.0, 80.0}, {600.0, 80.0})};
  m.drivable_polygons = {rectangle(-200.0, -0.5 * kLaneWidth, 600.0, 1.5 * kLaneWidth),
                         rectangle(xc - 1.5 * kLaneWidth, -300.0, xc + 0.5 * kLaneWidth, 300.0)};
  return m;
}

// On-ramp running 8 m right of the eastbound lane and blending into it over the 60 m before x_join.
inline Polyline ramp_path(double x_join, double length = 60.0, double offset = -8.0) {
  Polyline p;
  const double x_start = x_join - length;
  p.push_back({x_start - 200.0, offset});
  for (int i = 0; i <= 40; ++i) {
    const double u = i / 40.0;
    p.push_back({x_start + u * length, offset * (1.0 - (3.0 * u * u - 2.0 * u * u * u))});
  }
  p.push_back({600.0, 0.0});
  return dedupe_polyline(p, 1e-6);
}

inline MapGraph merge_map(double x_join) {
  MapGraph m = highway_map(2);
  m.lane_centerlines.insert(m.lane_centerlines.begin() + 2, ramp_path(x_join));
  m.drivable_polygons.push_back(rectangle(-200.0, -10.0, x_join, -0.5 * kLaneWidth));
  return m;
}

inline AgentTrack eastbound(std::string id, double lane, double x0, double v0, const AccelProfile& a = cruise()) {
  return track_along(std::move(id), straight({-400.0, lane * kLaneWidth}, {1200.0, lane * kLaneWidth}), x0 + 400.0, v0, a);
}

// A vehicle on the distant parallel road; never interacts with the ego.
inline AgentTrack bystander(std::string id, double x0, double v0) {
  return track_along(std::move(id), straight({-400.0, 80.0}, {1200.0, 80.0}), x0 + 400.0, v0, cruise());
}

// --- evaluation corpus ---

// Whether any two logged boxes meet at a common timestamp.
inline bool scenario_log_collides(const Scenario& s) {
  for (std::size_t i = 0; i < s.tracks.size(); ++i)
    for (std::size_t j = i + 1; j < s.tracks.size(); ++j) {
      const AgentTrack& a = s.tracks[i];
      const AgentTrack& b = s.tracks[j];
      for (const auto& pa : a.states)
        if (auto pb = pose_at(b.states, pa.t, s.dt);
            pb && boxes_intersect(box_at(pa, {a.length, a.width}), box_at(*pb, {b.length, b.width})))
          return true;
    }
  return false;
}

// Follower in the ego lane, `gap` m bumper to bumper behind at matched speed.
inline Scenario rear_follower(std::string id, double gap, double v) {
  const double len = 4.8;
  return make_scenario(std::move(id), highway_map(2),
                       {eastbound("ego", 0, 0.0, v), eastbound("follower", 0, -(gap + len), v),
                        bystander("far", 30.0, v)});
}

// Crossing traffic reaching the conflict point `lag` s after the ego (negative: before).
inline Scenario crossing(std::string id, double lag, double v_ego, double v_cross) {
  const double xc = 80.0;
  const double t_ego = xc / v_ego;  // the ego starts at x = 0
  const double t_cross = t_ego + lag;
  const double s_conflict = 300.0;  // crossing path starts at y = -300
  const double s0 = s_conflict - v_cross * t_cross;
  return make_scenario(std::move(id), intersection_map(xc),
                       {eastbound("ego", 0, 0.0, v_ego),
                        track_along("crosser", straight({xc, -300.0}, {xc, 300.0}), s0, v_cross, cruise()),
                        bystander("far", 20.0, v_ego)});
}

// Ramp vehicle joining the ego lane, `lag` s after the ego passes the join point.
inline Scenario merge(std::string id, double lag, double v_ego, double v_ramp) {
  const double x_join = 90.0;
  const Polyline ramp = ramp_path(x_join);
  const ArcLengthPath path(ramp);
  const double s_join = path.project({x_join, 0.0}).s;
  const double t_join = x_join / v_ego + lag;
  return make_scenario(std::move(id), merge_map(x_join),
                       {eastbound("ego", 0, 0.0, v_ego), track_along("merger", ramp, s_join - v_ramp * t_join, v_ramp, cruise()),
                        bystander("far", 0.0, v_ego)});
}

// Leader `gap` m ahead in the ego lane at matched speed.
inline Scenario lead(std::string id, double gap, double v) {
  return make_scenario(std::move(id), highway_map(2),
                       {eastbound("ego", 0, 0.0, v), eastbound("leader", 0, gap + 4.8, v), bystander("far", -40.0, v)});
}

// Vehicle in the adjacent lane, `dx` m ahead of the ego (negative: behind).
inline Scenario adjacent(std::string id, double dx, double v_ego, double v_adj) {
  return make_scenario(std::move(id), highway_map(2),
                       {eastbound("ego", 0, 0.0, v_ego), eastbound("neighbour", 1, dx, v_adj), bystander("far", 10.0, v_ego)});
}

// Near-miss interactions drawn from fixed ranges with a fixed seed: four each of
// rear followers, crossing traffic, ramp merges, adjacent-lane traffic and leaders.
// Draws whose log already contains a collision are redrawn.
inline std::vector<Scenario> evaluation_corpus(std::uint64_t seed = 2024) {
  Rng rng(seed);
  std::vector<Scenario> c;
  auto sign = [](int i) { return i % 2 == 0 ? 1.0 : -1.0; };
  auto push = [&](auto&& make) {
    for (;;) {
      Scenario s = make();
      if (!scenario_log_collides(s)) {
        c.push_back(std::move(s));
        return;
      }
    }
  };
  auto name = [](const char* kind, int i) { return std::string(kind) + "_0" + std::to_string(i + 1); };
  for (int i = 0; i < 4; ++i)
    push([&] { return rear_follower(name("rear", i), rng.uniform(4.0, 12.0), rng.uniform(10.0, 16.0)); });
  for (int i = 0; i < 4; ++i)
    push([&] {
      const double lag = sign(i) * rng.uniform(0.8, 1.6);
      const double ve = rng.uniform(10.0, 14.0);
      return crossing(name("cross", i), lag, ve, rng.uniform(8.0, 12.0));
    });
  for (int i = 0; i < 4; ++i)
    push([&] {
      const double lag = sign(i) * rng.uniform(0.8, 1.6);
      const double ve = rng.uniform(10.0, 14.0);
      return merge(name("merge", i), lag, ve, ve + rng.uniform(-2.0, 2.0));
    });
  for (int i = 0; i < 4; ++i)
    push([&] {
      const double dx = rng.uniform(-10.0, 15.0);
      const double ve = rng.uniform(12.0, 16.0);
      return adjacent(name("adj", i), dx, ve, ve + rng.uniform(-1.0, 1.0));
    });
  for (int i = 0; i < 4; ++i)
    push([&] { return lead(name("lead", i), rng.uniform(8.0, 25.0), rng.uniform(10.0, 16.0)); });
  return c;
}

// --- named fixtures ---

// Leader 15 m ahead; the other SVs are far away, oncoming, or on another road.
inline Scenario lead_vehicle_fixture() {
  MapGraph m = highway_map(2);
  m.lane_centerlines.push_back(straight({600.0, -kLaneWidth}, {-200.0, -kLaneWidth}));
  auto oncoming = track_along("oncoming", straight({600.0, -kLaneWidth}, {-200.0, -kLaneWidth}), 240.0, 14.0, cruise());
  return make_scenario("lead_vehicle", std::move(m),
                       {eastbound("ego", 0, 0.0, 14.0), eastbound("lead", 0, 19.8, 14.0), bystander("far_a", -20.0, 14.0),
                        bystander("far_b", 60.0, 13.0), std::move(oncoming)});
}

// Leader 45 m ahead slows from 15 to 7 m/s between t = 2 s and 6 s. The logged ego
// keeps its speed, so an IDM ego brakes where the log does not; a follower trails 25 m behind.
inline Scenario braking_ego_fixture() {
  return make_scenario("braking_ego", highway_map(2),
                       {eastbound("ego", 0, 0.0, 15.0), eastbound("lead", 0, 49.8, 15.0, accel_between(2.0, 6.0, -2.0)),
                        eastbound("follower", 0, -29.8, 15.0), bystander("far", 0.0, 15.0)});
}

// Corpus for the opponent scorer: near SVs in or beside the ego lane, far SVs on the distant road.
inline std::vector<Scenario> separable_training_corpus(int count = 40, std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<Scenario> out;
  for (int i = 0; i < count; ++i) {
    const double v = rng.uniform(8.0, 16.0);
    std::vector<AgentTrack> tracks{eastbound("ego", 0, 0.0, v)};
    tracks.push_back(eastbound("ahead", 0, rng.uniform(10.0, 30.0), v + rng.uniform(-1.0, 1.0)));
    tracks.push_back(eastbound("behind", 0, -rng.uniform(10.0, 30.0), v + rng.uniform(-1.0, 1.0)));
    tracks.push_back(eastbound("beside", 1, rng.uniform(-2.0, 2.0), v));
    for (int k = 0; k < 3; ++k)
      tracks.push_back(bystander("far_" + std::to_string(k), -60.0 + 50.0 * k + rng.uniform(-10.0, 10.0), v));
    out.push_back(make_scenario("train_" + std::to_string(i), highway_map(2), std::move(tracks)));
  }
  return out;
}

}  // namespace advsim::fixtures
