#pragma once

// Target-driven trajectory sampler behind a pluggable predictor interface.
//
// Candidates for an agent are a constant-velocity rollout, a hard-brake rollout,
// and one quintic per reachable lane-lattice goal. Each candidate gets a
// likelihood score from lane adherence, goal heading alignment, and peak
// acceleration; the top-n candidates are softmax-normalized. The conditional
// variant keeps the same top-n ego candidates and multiplies each weight by
// exp(-lambda * timestamps overlapping the given opponent trajectory).

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "advsim/error.hpp"
#include "advsim/geometry.hpp"
#include "advsim/scenario.hpp"

namespace advsim {

struct PredictorConfig {
  int n_hypotheses = 6;
  double goal_spacing = 5.0;     // m along lane centerlines
  double max_lon_accel = 4.0;    // m/s^2, also the hard-brake deceleration
  double max_lat_accel = 4.0;    // m/s^2
  double max_yaw_rate = 1.0;     // rad/s
  double lane_reach = 6.0;       // m, lanes farther than this from the agent carry no goals
  double lane_weight = 1.0;
  double heading_weight = 1.0;
  double accel_weight = 0.5;
  double reaction_lambda = 2.0;  // conditional only
  double score_temperature = 1.0;
  double dedupe_radius = 0.5;    // m, candidates ending this close to an earlier one are dropped
  double nms_radius = 0.0;       // m, top-n selection skips goals this close to a better kept one

  bool operator==(const PredictorConfig&) const = default;

  void check() const {
    if (n_hypotheses < 1) throw ConfigError("n_hypotheses must be >= 1");
    if (!(goal_spacing > 0.0) || !(max_lon_accel > 0.0) || !(max_lat_accel > 0.0) || !(max_yaw_rate > 0.0))
      throw ConfigError("predictor spacing and kinematic bounds must be > 0");
    if (!std::isfinite(lane_weight) || !std::isfinite(heading_weight) || !std::isfinite(accel_weight))
      throw ConfigError("predictor score weights must be finite");
    if (!(reaction_lambda >= 0.0)) throw ConfigError("reaction lambda must be >= 0");
    if (!(score_temperature > 0.0)) throw ConfigError("score temperature must be > 0");
  }
};

enum class CandidateKind { constant_velocity, hard_brake, lane_goal };

inline const char* to_string(CandidateKind k) {
  switch (k) {
    case CandidateKind::constant_velocity: return "constant_velocity";
    case CandidateKind::hard_brake: return "hard_brake";
    case CandidateKind::lane_goal: return "lane_goal";
  }
  return "?";
}

struct Candidate {
  CandidateKind kind = CandidateKind::constant_velocity;
  int lane = -1;             // lane of the goal, lane_goal only
  double goal_advance = 0.0; // m along the lane from the agent's foot point
  std::vector<Pose> poses;
  double base_score = 0.0;
  int overlap = 0;           // conditional only
  double log_weight = 0.0;   // base_score / temperature - lambda * overlap
};

struct HypothesisSet {
  std::string agent_id;
  std::vector<TrajectoryHypothesis> hypotheses;
  std::vector<Candidate> info;  // parallel to hypotheses; poses left empty
  bool fallback = false;        // no reachable lane goal: constant-velocity/hard-brake only
};

// Quintic p(t) matching position/velocity/acceleration at t = 0 and t = T.
struct Quintic {
  std::array<double, 6> c{};

  static Quintic fit(double p0, double v0, double a0, double p1, double v1, double a1, double T) {
    Quintic q;
    const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    q.c[0] = p0;
    q.c[1] = v0;
    q.c[2] = 0.5 * a0;
    q.c[3] = (20.0 * (p1 - p0) - (8.0 * v1 + 12.0 * v0) * T - (3.0 * a0 - a1) * T2) / (2.0 * T3);
    q.c[4] = (30.0 * (p0 - p1) + (14.0 * v1 + 16.0 * v0) * T + (3.0 * a0 - 2.0 * a1) * T2) / (2.0 * T4);
    q.c[5] = (12.0 * (p1 - p0) - 6.0 * (v1 + v0) * T - (a0 - a1) * T2) / (2.0 * T5);
    return q;
  }
  double value(double t) const { return c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5])))); }
  double derivative(double t) const {
    return c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
  }
  double second_derivative(double t) const {
    return 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
  }
};

namespace prediction_detail {

inline constexpr double kHeadingHoldSpeed = 0.1;

inline std::vector<Pose> rollout_constant_accel(const Pose& p0, double accel, int steps, double dt) {
  std::vector<Pose> out{p0};
  const Vec2 dir = unit_from_heading(p0.heading);
  double s = 0.0;
  double v = p0.speed;
  for (int i = 1; i <= steps; ++i) {
    const double v_next = std::max(0.0, v + accel * dt);
    // Exact distance for a constant-deceleration stop inside the step.
    if (accel < 0.0 && v + accel * dt < 0.0)
      s += v * v / (-2.0 * accel);
    else
      s += 0.5 * (v + v_next) * dt;
    v = v_next;
    const Vec2 pos = p0.position() + dir * s;
    out.push_back({p0.t + i * dt, pos.x, pos.y, p0.heading, v});
  }
  return out;
}

// Quintic in x and y from (p0, a0) to the goal at rest acceleration.
inline std::vector<Pose> rollout_quintic(const Pose& p0, Vec2 a0, Vec2 goal, double goal_heading, double goal_speed,
                                         int steps, double dt) {
  const double T = steps * dt;
  const Vec2 v0 = p0.velocity();
  const Vec2 v1 = unit_from_heading(goal_heading) * goal_speed;
  const Quintic qx = Quintic::fit(p0.x, v0.x, a0.x, goal.x, v1.x, 0.0, T);
  const Quintic qy = Quintic::fit(p0.y, v0.y, a0.y, goal.y, v1.y, 0.0, T);
  std::vector<Pose> out{p0};
  double heading = p0.heading;
  for (int i = 1; i <= steps; ++i) {
    const double t = i * dt;
    const double vx = qx.derivative(t);
    const double vy = qy.derivative(t);
    const double speed = std::hypot(vx, vy);
    if (speed > kHeadingHoldSpeed) heading = std::atan2(vy, vx);
    out.push_back({p0.t + t, qx.value(t), qy.value(t), heading, speed});
  }
  return out;
}

// Backward-difference acceleration of the last two states, norm-limited to a_max.
inline Vec2 observed_acceleration(const std::vector<Pose>& states, double dt, double a_max) {
  if (states.size() < 2) return {};
  const Pose& a = states[states.size() - 2];
  const Pose& b = states.back();
  if (grid_index(b.t, dt) - grid_index(a.t, dt) != 1) return {};
  const Vec2 acc = (b.velocity() - a.velocity()) * (1.0 / dt);
  const double n = acc.norm();
  return n > a_max ? acc * (a_max / n) : acc;
}

struct StepKinematics {
  double peak_accel = 0.0;
  bool feasible = true;
};

// Finite-difference kinematics of a sampled trajectory against the configured bounds.
inline StepKinematics check_kinematics(const std::vector<Pose>& poses, double dt, const PredictorConfig& cfg) {
  constexpr double tol = 1e-9;
  StepKinematics k;
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const double a_lon = (poses[i].speed - poses[i - 1].speed) / dt;
    const double dh = angle_diff(poses[i].heading, poses[i - 1].heading);
    const double a_lat = poses[i].speed * std::abs(dh) / dt;
    k.peak_accel = std::max(k.peak_accel, std::hypot(a_lon, a_lat));
    if (std::abs(a_lon) > cfg.max_lon_accel + tol || a_lat > cfg.max_lat_accel + tol ||
        std::abs(dh) > cfg.max_yaw_rate * dt + tol)
      k.feasible = false;
  }
  return k;
}

inline double nearest_lane_distance(const std::vector<ArcLengthPath>& lanes, Vec2 p, const ArcLengthPath** which) {
  double best = INFINITY;
  for (const auto& lane : lanes) {
    const double d = point_to_polyline_distance(p, lane.points());
    if (d < best) {
      best = d;
      if (which) *which = &lane;
    }
  }
  return best;
}

inline double base_score(const std::vector<Pose>& poses, const std::vector<ArcLengthPath>& lanes, double peak_accel,
                         const PredictorConfig& cfg) {
  double mean_offset = 0.0;
  double goal_heading_err = 0.0;
  if (!lanes.empty()) {
    for (const auto& p : poses) mean_offset += nearest_lane_distance(lanes, p.position(), nullptr);
    mean_offset /= static_cast<double>(poses.size());
    const ArcLengthPath* lane = nullptr;
    nearest_lane_distance(lanes, poses.back().position(), &lane);
    const auto proj = lane->project(poses.back().position());
    goal_heading_err = std::abs(angle_diff(poses.back().heading, proj.heading));
  }
  return -(cfg.lane_weight * mean_offset + cfg.heading_weight * goal_heading_err + cfg.accel_weight * peak_accel);
}

inline int horizon_steps(const Scenario& obs) {
  const int steps = static_cast<int>(std::lround(obs.future_horizon / obs.dt));
  if (steps < 1) throw ConfigError("future_horizon must cover at least one dt step");
  return steps;
}

}  // namespace prediction_detail

// Every feasible, de-duplicated candidate for `agent`, in generation order
// (constant velocity, hard brake, then lane goals lane by lane, nearest first).
inline std::vector<Candidate> generate_candidates(const Scenario& obs, const std::string& agent,
                                                  const PredictorConfig& cfg, bool* fallback = nullptr) {
  using namespace prediction_detail;
  cfg.check();
  const AgentTrack& tr = obs.track(agent);
  if (tr.states.size() < 2) throw InsufficientDataError("agent '" + agent + "' has fewer than 2 history states");
  const Pose& p0 = tr.states.back();
  const int steps = horizon_steps(obs);
  const double dt = obs.dt;
  const double H = steps * dt;
  const Vec2 a0 = observed_acceleration(tr.states, dt, cfg.max_lon_accel);

  std::vector<ArcLengthPath> lanes;
  lanes.reserve(obs.map.lane_centerlines.size());
  for (const auto& l : obs.map.lane_centerlines) lanes.emplace_back(dedupe_polyline(l));

  std::vector<Candidate> raw;
  raw.push_back({CandidateKind::constant_velocity, -1, 0.0, rollout_constant_accel(p0, 0.0, steps, dt)});
  raw.push_back({CandidateKind::hard_brake, -1, 0.0, rollout_constant_accel(p0, -cfg.max_lon_accel, steps, dt)});

  const double reach = p0.speed * H + 0.5 * cfg.max_lon_accel * H * H;
  for (std::size_t li = 0; li < lanes.size(); ++li) {
    const ArcLengthPath& lane = lanes[li];
    const auto proj = lane.project(p0.position());
    if (proj.distance > cfg.lane_reach) continue;
    if (proj.s < -cfg.lane_reach || proj.s > lane.length()) continue;
    if (std::abs(angle_diff(proj.heading, p0.heading)) >= std::numbers::pi / 2) continue;
    for (int k = 1; k * cfg.goal_spacing <= reach + 1e-9; ++k) {
      const double advance = k * cfg.goal_spacing;
      const double s_goal = proj.s + advance;
      if (s_goal > lane.length()) break;
      const double v_goal = 2.0 * advance / H - p0.speed;
      if (v_goal < 0.0) continue;
      raw.push_back({CandidateKind::lane_goal, static_cast<int>(li), advance,
                     rollout_quintic(p0, a0, lane.point_at(s_goal), lane.heading_at(s_goal), v_goal, steps, dt)});
    }
  }

  std::vector<Candidate> out;
  bool any_lane_goal = false;
  for (auto& c : raw) {
    const auto kin = check_kinematics(c.poses, dt, cfg);
    if (!kin.feasible) continue;
    const Vec2 end = c.poses.back().position();
    bool duplicate = false;
    for (const auto& kept : out)
      if (distance(kept.poses.back().position(), end) < cfg.dedupe_radius) duplicate = true;
    if (duplicate) continue;
    c.base_score = base_score(c.poses, lanes, kin.peak_accel, cfg);
    any_lane_goal = any_lane_goal || c.kind == CandidateKind::lane_goal;
    out.push_back(std::move(c));
  }
  if (!any_lane_goal) {
    // Off-map fallback keeps only the two kinematic rollouts.
    std::erase_if(out, [](const Candidate& c) { return c.kind == CandidateKind::lane_goal; });
  }
  if (fallback) *fallback = !any_lane_goal;
  return out;
}

// Greedy top-n by base score (ties to the lower index) with non-maximum suppression on
// end points; suppressed candidates back-fill when too few survive.
inline std::vector<Candidate> top_candidates(std::vector<Candidate> cands, int n, double nms_radius = 0.0) {
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cands[a].base_score > cands[b].base_score; });
  const std::size_t want = std::min<std::size_t>(static_cast<std::size_t>(n), order.size());
  std::vector<std::size_t> kept, suppressed;
  for (std::size_t i : order) {
    if (kept.size() == want) break;
    bool near = false;
    for (std::size_t k : kept)
      if (distance(cands[k].poses.back().position(), cands[i].poses.back().position()) < nms_radius) near = true;
    (near ? suppressed : kept).push_back(i);
  }
  for (std::size_t i = 0; kept.size() < want && i < suppressed.size(); ++i) kept.push_back(suppressed[i]);
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    return cands[a].base_score > cands[b].base_score || (cands[a].base_score == cands[b].base_score && a < b);
  });
  std::vector<Candidate> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(std::move(cands[i]));
  return out;
}

// Softmax over log_weight, in the given order.
inline HypothesisSet normalize_hypotheses(std::string agent, std::vector<Candidate> kept, bool fallback) {
  HypothesisSet out;
  out.agent_id = std::move(agent);
  out.fallback = fallback;
  if (kept.empty()) return out;
  double top = kept.front().log_weight;
  for (const auto& c : kept) top = std::max(top, c.log_weight);
  std::vector<double> w(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) w[i] = std::exp(kept[i].log_weight - top);
  // Sum in ascending order for a stable total.
  std::vector<double> sorted_w = w;
  std::sort(sorted_w.begin(), sorted_w.end());
  const double total = std::accumulate(sorted_w.begin(), sorted_w.end(), 0.0);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Candidate& c = kept[i];
    out.hypotheses.push_back({std::move(c.poses), w[i] / total});
    c.poses.clear();
    out.info.push_back(std::move(c));
  }
  return out;
}

inline HypothesisSet select_hypotheses(std::string agent, std::vector<Candidate> cands, const PredictorConfig& cfg,
                                       bool fallback) {
  auto kept = top_candidates(std::move(cands), cfg.n_hypotheses, cfg.nms_radius);
  for (auto& c : kept) c.log_weight = c.base_score / cfg.score_temperature;
  return normalize_hypotheses(std::move(agent), std::move(kept), fallback);
}

// Distribution over the future of `agent` given the observation alone.
inline HypothesisSet predict_marginal(const Scenario& obs, const std::string& agent, const PredictorConfig& cfg) {
  bool fallback = false;
  auto cands = generate_candidates(obs, agent, cfg, &fallback);
  return select_hypotheses(agent, std::move(cands), cfg, fallback);
}

// Reweights candidates by exp(-lambda * overlap) against the opponent trajectory.
inline void apply_reaction(std::vector<Candidate>& cands, const TrajectoryHypothesis& y_ov, BoxDims agent_dims,
                           BoxDims ov_dims, const PredictorConfig& cfg) {
  for (auto& c : cands) {
    c.overlap = count_overlaps(c.poses, y_ov.poses, agent_dims, ov_dims);
    c.log_weight = c.base_score / cfg.score_temperature - cfg.reaction_lambda * c.overlap;
  }
}

// The marginal top-n ego candidates, to be reweighted against each opponent trajectory.
struct EgoCandidateSet {
  std::string agent_id;
  BoxDims dims;
  std::vector<Candidate> kept;
  bool fallback = false;
};

inline EgoCandidateSet prepare_conditional(const Scenario& obs, const std::string& ego, const PredictorConfig& cfg) {
  EgoCandidateSet set;
  set.agent_id = ego;
  const AgentTrack& tr = obs.track(ego);
  set.dims = {tr.length, tr.width};
  set.kept = top_candidates(generate_candidates(obs, ego, cfg, &set.fallback), cfg.n_hypotheses, cfg.nms_radius);
  return set;
}

inline HypothesisSet condition_on(const EgoCandidateSet& set, const TrajectoryHypothesis& y_ov, BoxDims ov_dims,
                                  const PredictorConfig& cfg) {
  auto kept = set.kept;
  apply_reaction(kept, y_ov, set.dims, ov_dims, cfg);
  return normalize_hypotheses(set.agent_id, std::move(kept), set.fallback);
}

// Distribution over the ego's reaction given an opponent trajectory.
inline HypothesisSet predict_conditional(const Scenario& obs, const std::string& ego, const TrajectoryHypothesis& y_ov,
                                         BoxDims ov_dims, const PredictorConfig& cfg) {
  return condition_on(prepare_conditional(obs, ego, cfg), y_ov, ov_dims, cfg);
}

// Module boundary for swapping in learned predictors.
class TrajectoryPredictor {
 public:
  virtual ~TrajectoryPredictor() = default;
  virtual HypothesisSet marginal(const Scenario& obs, const std::string& agent) const = 0;
  virtual HypothesisSet conditional(const Scenario& obs, const std::string& ego, const TrajectoryHypothesis& y_ov,
                                    BoxDims ov_dims) const = 0;

  // One conditional set per opponent hypothesis. Overridable when work can be shared.
  virtual std::vector<HypothesisSet> conditionals(const Scenario& obs, const std::string& ego,
                                                  const std::vector<TrajectoryHypothesis>& ys, BoxDims ov_dims) const {
    std::vector<HypothesisSet> out;
    out.reserve(ys.size());
    for (const auto& y : ys) out.push_back(conditional(obs, ego, y, ov_dims));
    return out;
  }
};

class TargetDrivenPredictor : public TrajectoryPredictor {
 public:
  TargetDrivenPredictor(PredictorConfig base, int n_marginal, int n_conditional) : marginal_cfg_(base), conditional_cfg_(base) {
    marginal_cfg_.n_hypotheses = n_marginal;
    conditional_cfg_.n_hypotheses = n_conditional;
    marginal_cfg_.check();
    conditional_cfg_.check();
  }

  HypothesisSet marginal(const Scenario& obs, const std::string& agent) const override {
    return predict_marginal(obs, agent, marginal_cfg_);
  }
  HypothesisSet conditional(const Scenario& obs, const std::string& ego, const TrajectoryHypothesis& y_ov,
                            BoxDims ov_dims) const override {
    return predict_conditional(obs, ego, y_ov, ov_dims, conditional_cfg_);
  }
  std::vector<HypothesisSet> conditionals(const Scenario& obs, const std::string& ego,
                                          const std::vector<TrajectoryHypothesis>& ys, BoxDims ov_dims) const override {
    const auto set = prepare_conditional(obs, ego, conditional_cfg_);
    std::vector<HypothesisSet> out;
    out.reserve(ys.size());
    for (const auto& y : ys) out.push_back(condition_on(set, y, ov_dims, conditional_cfg_));
    return out;
  }

 private:
  PredictorConfig marginal_cfg_;
  PredictorConfig conditional_cfg_;
};

}  // namespace advsim
