#pragma once

// Ego policies for the closed loop: log replay and IDM car-following along the logged route.

#include <cmath>
#include <optional>
#include <string>

#include "advsim/error.hpp"
#include "advsim/geometry.hpp"
#include "advsim/scenario.hpp"

namespace advsim {

enum class PlannerKind { replay, idm };

inline const char* to_string(PlannerKind k) { return k == PlannerKind::replay ? "replay" : "idm"; }

struct IdmParams {
  std::optional<double> desired_speed;  // v0; defaults to the logged ego mean speed
  double time_headway = 1.5;            // T_h, s
  double min_gap = 2.0;                 // s0, m
  double max_accel = 2.0;               // a, m/s^2
  double comfort_decel = 2.0;           // b, m/s^2
  double exponent = 4.0;                // delta
  double max_decel = 6.0;               // b_max, m/s^2, lower clamp
  double corridor_half_width = 3.0;     // m, leader search around the reference path
  double path_lost_distance = 2.0;      // m

  bool operator==(const IdmParams&) const = default;

  void check() const {
    if ((desired_speed && !(*desired_speed > 0.0)) || !(time_headway > 0.0) || !(min_gap > 0.0) ||
        !(max_accel > 0.0) || !(comfort_decel > 0.0) || !(exponent > 0.0) || !(max_decel > 0.0) ||
        !(corridor_half_width > 0.0) || !(path_lost_distance > 0.0))
      throw ConfigError("IDM parameters must be > 0");
  }
};

struct PlannerConfig {
  PlannerKind kind = PlannerKind::idm;
  IdmParams idm;
  bool operator==(const PlannerConfig&) const = default;
};

// Logged ego pose one step after t_now; nullopt at end of log.
inline std::optional<Pose> replay_step(const Scenario& s, double t_now) {
  return pose_at(s.ego().states, t_now + s.dt, s.dt);
}

inline constexpr double kMinIdmGap = 0.01;

// Unclamped IDM acceleration. No leader when `gap` is empty.
inline double idm_acceleration(double v, double v0, std::optional<double> gap, double dv, const IdmParams& p) {
  const double free_term = std::pow(v / v0, p.exponent);
  double interaction = 0.0;
  if (gap) {
    const double s_star =
        p.min_gap + std::max(0.0, v * p.time_headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    const double s_gap = std::max(*gap, kMinIdmGap);
    interaction = (s_star / s_gap) * (s_star / s_gap);
  }
  return p.max_accel * (1.0 - free_term - interaction);
}

inline double clamp_idm_acceleration(double a, const IdmParams& p) { return std::clamp(a, -p.max_decel, p.max_accel); }

struct Leader {
  std::string id;
  double gap = 0.0;    // bumper to bumper along the path
  double speed = 0.0;  // along the path
};

// IDM speed control along the logged ego path. Holds no mutable state.
class IdmPlanner {
 public:
  IdmPlanner(const Scenario& logged, IdmParams params) : params_(params) {
    params_.check();
    const AgentTrack& ego = logged.ego();
    ego_dims_ = {ego.length, ego.width};
    Polyline pts = dedupe_polyline(positions_of(ego.states), 1e-3);
    if (pts.size() < 2) {
      const Pose& p = ego.states.front();
      pts = {p.position(), p.position() + unit_from_heading(p.heading) * 1000.0};
    }
    path_ = ArcLengthPath(std::move(pts));
    if (!params_.desired_speed) {
      double sum = 0.0;
      for (const auto& st : ego.states) sum += st.speed;
      params_.desired_speed = std::max(sum / static_cast<double>(ego.states.size()), 0.1);
    }
  }

  const IdmParams& params() const { return params_; }
  const ArcLengthPath& reference_path() const { return path_; }

  // Nearest agent ahead whose centre lies inside the corridor around the path.
  std::optional<Leader> find_leader(const Scenario& current, double ego_s) const {
    std::optional<Leader> best;
    const double t_now = current.ego().states.back().t;
    for (const auto& tr : current.tracks) {
      if (tr.id == current.ego_id || tr.states.empty()) continue;
      const Pose& o = tr.states.back();
      if (std::abs(o.t - t_now) > 0.5 * current.dt) continue;
      const auto proj = path_.project(o.position());
      if (std::abs(proj.lateral) > params_.corridor_half_width || proj.distance > params_.corridor_half_width) continue;
      if (proj.s <= ego_s) continue;
      const double gap = proj.s - ego_s - 0.5 * (ego_dims_.length + tr.length);
      if (!best || gap < best->gap)
        best = Leader{tr.id, gap, o.speed * std::cos(angle_diff(o.heading, proj.heading))};
    }
    return best;
  }

  double acceleration(const Scenario& current) const {
    const Pose& e = current.ego().states.back();
    const auto proj = locate(e);
    const auto leader = find_leader(current, proj.s);
    const double raw = leader ? idm_acceleration(e.speed, *params_.desired_speed, leader->gap, e.speed - leader->speed, params_)
                              : idm_acceleration(e.speed, *params_.desired_speed, std::nullopt, 0.0, params_);
    return clamp_idm_acceleration(raw, params_);
  }

  // Ego pose at t_now + dt given the current states of all agents.
  Pose step(const Scenario& current) const {
    const Pose& e = current.ego().states.back();
    const auto proj = locate(e);
    const double a = acceleration(current);
    const double dt = current.dt;
    const double v_next = std::max(0.0, e.speed + a * dt);
    const double ds = (e.speed + a * dt < 0.0) ? e.speed * e.speed / (-2.0 * a) : 0.5 * (e.speed + v_next) * dt;
    const double s_next = proj.s + ds;
    const Vec2 pos = path_.point_at(s_next);
    return {e.t + dt, pos.x, pos.y, normalize_angle(path_.heading_at(s_next)), v_next};
  }

 private:
  PathProjection locate(const Pose& e) const {
    const auto proj = path_.project(e.position());
    if (proj.distance > params_.path_lost_distance)
      throw PathLostError("ego is " + std::to_string(proj.distance) + " m from its reference path");
    return proj;
  }

  IdmParams params_;
  BoxDims ego_dims_;
  ArcLengthPath path_;
};

inline Pose idm_step(const IdmPlanner& planner, const Scenario& current) { return planner.step(current); }

}  // namespace advsim
