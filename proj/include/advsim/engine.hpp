#pragma once

// Closed-loop adversarial simulation.
//
// The opponent is assigned once from the adversarial scores. Every update cycle
// the engine predicts opponent futures, predicts the ego's reaction to each,
// and keeps the opponent future that maximizes
//
//   risk_j = P_j * sum_k Q_jk * Coll_jk
//
// falling back to the most likely (j, k) pair when no pair collides. Between
// replans the opponent plays back its plan waypoint by waypoint, bystanders
// replay their logs, and the ego advances under its planner.

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <algorithm>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "advsim/error.hpp"
#include "advsim/geometry.hpp"
#include "advsim/opponent.hpp"
#include "advsim/planners.hpp"
#include "advsim/prediction.hpp"
#include "advsim/random.hpp"
#include "advsim/scenario.hpp"

namespace advsim {

enum class SimMode { G, S1, S2, S4, custom };

inline const char* to_string(SimMode m) {
  switch (m) {
    case SimMode::G: return "g";
    case SimMode::S1: return "s1";
    case SimMode::S2: return "s2";
    case SimMode::S4: return "s4";
    case SimMode::custom: return "custom";
  }
  return "?";
}

inline SimMode sim_mode_from_string(const std::string& s) {
  if (s == "g" || s == "G") return SimMode::G;
  if (s == "s1" || s == "S1") return SimMode::S1;
  if (s == "s2" || s == "S2") return SimMode::S2;
  if (s == "s4" || s == "S4") return SimMode::S4;
  if (s == "custom") return SimMode::custom;
  throw ConfigError("unknown mode '" + s + "'");
}

struct SimConfig {
  SimMode mode = SimMode::S1;
  double update_cycle = 1.0;  // s; infinity plans once (G)
  int n1 = 6;
  int n2 = 6;
  PredictorConfig predictor;
  PlannerConfig planner;
  SelectionMode selection = SelectionMode::sample;
  double selection_temperature = 0.1;
  std::uint64_t seed = 0;
  std::optional<double> future_horizon;     // overrides the scenario's
  bool null_adversary = false;              // the opponent replays its log
  std::optional<std::string> opponent;      // forced opponent, skips scoring

  bool operator==(const SimConfig&) const = default;

  static SimConfig for_mode(SimMode m) {
    SimConfig c;
    c.set_mode(m);
    return c;
  }

  void set_mode(SimMode m) {
    mode = m;
    switch (m) {
      case SimMode::G: update_cycle = std::numeric_limits<double>::infinity(); break;
      case SimMode::S1: update_cycle = 1.0; break;
      case SimMode::S2: update_cycle = 2.0; break;
      case SimMode::S4: update_cycle = 4.0; break;
      case SimMode::custom: break;
    }
  }

  void check() const {
    const double expected = mode == SimMode::G    ? std::numeric_limits<double>::infinity()
                            : mode == SimMode::S1 ? 1.0
                            : mode == SimMode::S2 ? 2.0
                            : mode == SimMode::S4 ? 4.0
                                                  : update_cycle;
    if (update_cycle != expected) throw ConfigError(std::string("mode ") + to_string(mode) + " fixes the update cycle");
    if (!(update_cycle > 0.0)) throw ConfigError("update cycle must be > 0");
    if (n1 < 1 || n2 < 1) throw ConfigError("n1 and n2 must be >= 1");
    if (!(selection_temperature > 0.0)) throw ConfigError("selection temperature must be > 0");
    if (future_horizon && !(*future_horizon > 0.0)) throw ConfigError("future_horizon must be > 0");
    predictor.check();
    planner.idm.check();
  }
};

struct AdversarialChoice {
  TrajectoryHypothesis trajectory;
  int index = 0;
  std::vector<double> risks;           // per marginal hypothesis
  bool collision_found = false;        // false: chosen by the max P_j * Q_k fallback
  int fallback_k = -1;
  HypothesisSet marginal;
  std::vector<HypothesisSet> conditionals;      // one per marginal hypothesis
  std::vector<std::vector<char>> coll;          // coll[j][k]
};

// One replan: marginal OV prediction, conditional ego reaction per OV hypothesis,
// collision judgment over all pairs, and the risk argmax (ties: lowest index).
inline AdversarialChoice select_adversarial_trajectory(const Scenario& obs, const std::string& ov, const std::string& ego,
                                                       const TrajectoryPredictor& predictor) {
  const AgentTrack& ov_track = obs.track(ov);
  const AgentTrack& ego_track = obs.track(ego);
  const BoxDims ov_dims{ov_track.length, ov_track.width};
  const BoxDims ego_dims{ego_track.length, ego_track.width};

  AdversarialChoice out;
  out.marginal = predictor.marginal(obs, ov);
  const auto& ys = out.marginal.hypotheses;
  if (ys.empty()) throw InsufficientDataError("opponent prediction returned no hypotheses");

  out.risks.assign(ys.size(), 0.0);
  out.conditionals = predictor.conditionals(obs, ego, ys, ov_dims);
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const auto& qs = out.conditionals[j].hypotheses;
    std::vector<char> row(qs.size(), 0);
    double expected = 0.0;
    for (std::size_t k = 0; k < qs.size(); ++k) {
      row[k] = trajectory_collision(ys[j], qs[k], ov_dims, ego_dims).occurred ? 1 : 0;
      if (row[k]) expected += qs[k].probability;
    }
    out.coll.push_back(std::move(row));
    out.risks[j] = ys[j].probability * expected;
  }

  int best = -1;
  for (std::size_t j = 0; j < ys.size(); ++j)
    if (out.risks[j] > 0.0 && (best < 0 || out.risks[j] > out.risks[best])) best = static_cast<int>(j);
  if (best >= 0) {
    out.collision_found = true;
  } else {
    double best_pair = -1.0;
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const auto& qs = out.conditionals[j].hypotheses;
      for (std::size_t k = 0; k < qs.size(); ++k) {
        const double pq = ys[j].probability * qs[k].probability;
        if (pq > best_pair) {
          best_pair = pq;
          best = static_cast<int>(j);
          out.fallback_k = static_cast<int>(k);
        }
      }
    }
  }
  out.index = best;
  out.trajectory = ys[best];
  return out;
}

struct ReplanRecord {
  double t = 0.0;
  int chosen_index = 0;
  bool collision_found = false;
  std::vector<double> risks;
  TrajectoryHypothesis chosen;
  bool operator==(const ReplanRecord&) const = default;
};

struct EpisodeCollision {
  CollisionReport report;
  bool with_opponent = false;
  std::string agent_id;  // agent the ego touched
  bool operator==(const EpisodeCollision&) const = default;
};

struct EpisodeResult {
  std::string scenario_id;
  std::uint64_t seed = 0;
  bool valid = true;
  std::string error;
  std::string opponent_id;
  std::map<std::string, double> opponent_scores;
  EpisodeCollision collision;
  std::vector<ReplanRecord> replans;
  std::vector<Pose> ego_track;       // history up to the start, then simulated
  std::vector<Pose> opponent_track;
  double start_time = 0.0;
  std::string end_reason;            // collision | horizon | end_of_log | error
  int plan_exhausted_steps = 0;      // steps the opponent held constant velocity past its plan
  double generation_time = 0.0;      // wall clock, s

  // Everything except the wall-clock time.
  bool same_outcome(const EpisodeResult& o) const {
    return scenario_id == o.scenario_id && seed == o.seed && valid == o.valid && error == o.error &&
           opponent_id == o.opponent_id && opponent_scores == o.opponent_scores && collision == o.collision &&
           replans == o.replans && ego_track == o.ego_track && opponent_track == o.opponent_track &&
           start_time == o.start_time && end_reason == o.end_reason && plan_exhausted_steps == o.plan_exhausted_steps;
  }
};

namespace engine_detail {

inline Pose constant_velocity_step(const Pose& p, double dt) {
  const Vec2 pos = p.position() + p.velocity() * dt;
  return {p.t + dt, pos.x, pos.y, p.heading, p.speed};
}

inline long cycle_steps(double update_cycle, double dt) {
  if (!std::isfinite(update_cycle)) return 0;
  return std::max(1L, std::lround(update_cycle / dt));
}

}  // namespace engine_detail

// One closed-loop episode. Throws NoOpponentError when nothing can be scored;
// a lost IDM path marks the result invalid instead.
inline EpisodeResult run_episode(const Scenario& s, const SimConfig& cfg, const ScorerModel& model,
                                 std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  cfg.check();
  validate(s);

  const double dt = s.dt;
  const double horizon = cfg.future_horizon.value_or(s.future_horizon);
  const long t0_step = grid_index(s.start_time() + s.history_horizon, dt);
  const double t0 = t0_step * dt;
  const long steps = std::lround(horizon / dt);
  const long replan_every = engine_detail::cycle_steps(cfg.update_cycle, dt);

  EpisodeResult res;
  res.scenario_id = s.id;
  res.seed = seed;
  res.start_time = t0;

  // World state: every track truncated to t <= t0, then grown step by step.
  Scenario world = s;
  world.future_horizon = horizon;
  for (auto& tr : world.tracks)
    std::erase_if(tr.states, [&](const Pose& p) { return grid_index(p.t, dt) > t0_step; });
  auto world_track = [&](const std::string& id) -> AgentTrack& {
    for (auto& tr : world.tracks)
      if (tr.id == id) return tr;
    throw ValidationError(id, 0.0, "unknown agent_id");
  };
  auto observe = [&](double t) { return slice_observation(world, t); };

  const Scenario obs0 = observe(t0);
  if (cfg.opponent) {
    if (*cfg.opponent == s.ego_id || !obs0.find_track(*cfg.opponent))
      throw NoOpponentError("forced opponent '" + *cfg.opponent + "' is not an observed surrounding vehicle");
    res.opponent_id = *cfg.opponent;
  } else {
    const auto scored = score_and_select(obs0, model, cfg.selection, cfg.selection_temperature, seed);
    res.opponent_id = scored.selected;
    res.opponent_scores = scored.scores;
  }
  const std::string& ov = res.opponent_id;

  const TargetDrivenPredictor predictor(cfg.predictor, cfg.n1, cfg.n2);
  std::optional<IdmPlanner> idm;
  if (cfg.planner.kind == PlannerKind::idm) idm.emplace(s, cfg.planner.idm);

  std::optional<TrajectoryHypothesis> plan;
  res.end_reason = "horizon";
  try {
    for (long k = 0; k < steps; ++k) {
      const double t = (t0_step + k) * dt;
      const double t_next = (t0_step + k + 1) * dt;

      if (!cfg.null_adversary && (k == 0 || (replan_every > 0 && k % replan_every == 0))) {
        // Predict over what is left of the episode so every planned contact can still happen.
        Scenario obs = observe(t);
        obs.future_horizon = static_cast<double>(steps - k) * dt;
        if (obs.find_track(ov) && obs.track(ov).states.size() >= 2) {
          auto choice = select_adversarial_trajectory(obs, ov, s.ego_id, predictor);
          res.replans.push_back({t, choice.index, choice.collision_found, choice.risks, choice.trajectory});
          plan = std::move(choice.trajectory);
        }
      }

      // Ego first, on the state at t.
      std::optional<Pose> ego_next;
      if (idm) {
        ego_next = idm->step(observe(t));
      } else {
        ego_next = replay_step(s, t);
        if (!ego_next) {
          res.end_reason = "end_of_log";
          break;
        }
      }

      std::optional<Pose> ov_next;
      if (cfg.null_adversary) {
        ov_next = pose_at(s.track(ov).states, t_next, dt);
      } else if (plan) {
        ov_next = pose_at(plan->poses, t_next, dt);
        if (!ov_next) {
          const auto& cur = world_track(ov).states;
          if (!cur.empty()) ov_next = engine_detail::constant_velocity_step(cur.back(), dt);
          ++res.plan_exhausted_steps;
        }
      }

      for (const auto& logged : s.tracks) {
        AgentTrack& tr = world_track(logged.id);
        if (logged.id == s.ego_id) {
          tr.states.push_back(*ego_next);
        } else if (logged.id == ov) {
          if (ov_next) tr.states.push_back(*ov_next);
        } else if (auto p = pose_at(logged.states, t_next, dt)) {
          tr.states.push_back(*p);
        }
      }

      // Ego against everyone present at t_next; opponent contact takes precedence.
      const AgentTrack& ego_tr = world_track(s.ego_id);
      const BoxDims ego_dims{ego_tr.length, ego_tr.width};
      const Pose& e = ego_tr.states.back();
      std::optional<EpisodeCollision> hit;
      for (const auto& tr : world.tracks) {
        if (tr.id == s.ego_id || tr.states.empty() || grid_index(tr.states.back().t, dt) != t0_step + k + 1) continue;
        const Pose& o = tr.states.back();
        if (!boxes_intersect(box_at(e, ego_dims), box_at(o, {tr.length, tr.width}))) continue;
        EpisodeCollision c{{true, t_next, (e.velocity() - o.velocity()).norm()}, tr.id == ov, tr.id};
        if (!hit || (c.with_opponent && !hit->with_opponent)) hit = c;
      }
      if (hit) {
        res.collision = *hit;
        res.end_reason = "collision";
        break;
      }
    }
  } catch (const PathLostError& e) {
    res.valid = false;
    res.error = e.what();
    res.end_reason = "error";
  }

  res.ego_track = world_track(s.ego_id).states;
  res.opponent_track = world_track(ov).states;
  const double elapsed = std::chrono::duration<double>(clock::now() - started).count();
  res.generation_time = std::max(elapsed, 1e-9);
  return res;
}

inline EpisodeResult run_episode(const Scenario& s, const SimConfig& cfg, const ScorerModel& model) {
  return run_episode(s, cfg, model, derive_seed(cfg.seed, s.id));
}

// Order-preserving batch with per-scenario seeds; failures are recorded, not fatal.
inline std::vector<EpisodeResult> run_batch(const std::vector<Scenario>& corpus, const SimConfig& cfg,
                                            const ScorerModel& model, int parallelism = 1) {
  if (corpus.empty()) throw InsufficientDataError("empty corpus");
  cfg.check();
  std::vector<EpisodeResult> results(corpus.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < corpus.size(); i = next++) {
      const std::uint64_t seed = derive_seed(cfg.seed, corpus[i].id);
      try {
        results[i] = run_episode(corpus[i], cfg, model, seed);
      } catch (const std::exception& e) {
        EpisodeResult failed;
        failed.scenario_id = corpus[i].id;
        failed.seed = seed;
        failed.valid = false;
        failed.error = e.what();
        failed.end_reason = "error";
        failed.generation_time = 1e-9;
        results[i] = std::move(failed);
      }
    }
  };
  const int n_threads = std::clamp(parallelism, 1, static_cast<int>(corpus.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  return results;
}

// Raw-log outcome: first timestamp after the start at which the ego box meets any logged agent.
inline EpisodeCollision logged_collision(const Scenario& s) {
  const AgentTrack& ego = s.ego();
  const BoxDims ego_dims{ego.length, ego.width};
  const long t0_step = grid_index(s.start_time() + s.history_horizon, s.dt);
  for (const auto& e : ego.states) {
    if (grid_index(e.t, s.dt) <= t0_step) continue;
    for (const auto& tr : s.tracks) {
      if (tr.id == s.ego_id) continue;
      if (auto o = pose_at(tr.states, e.t, s.dt);
          o && boxes_intersect(box_at(e, ego_dims), box_at(*o, {tr.length, tr.width})))
        return {{true, e.t, (e.velocity() - o->velocity()).norm()}, false, tr.id};
    }
  }
  return {};
}

}  // namespace advsim
