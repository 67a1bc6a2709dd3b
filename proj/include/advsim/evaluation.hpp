#pragma once

// Batch-level efficiency and naturalness evaluation of episode results.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "advsim/engine.hpp"
#include "advsim/metrics.hpp"

namespace advsim {

struct EfficiencyReport {
  int episodes = 0;
  int valid_episodes = 0;
  int collisions = 0;
  double collision_rate = 0.0;
  std::optional<double> mean_collision_time;  // s after the start, colliding episodes only
  std::optional<double> mean_relative_speed;  // m/s, colliding episodes only
  double mean_generation_time = 0.0;
};

struct NaturalnessReport {
  std::optional<double> kl_divergence;
  std::optional<double> wasserstein_distance;
  std::optional<double> sspd;
  std::optional<double> hausdorff;
  int acceleration_samples = 0;
  int trajectories = 0;
};

struct MatchedTrack {
  std::vector<Pose> simulated;
  std::vector<Pose> logged;
};

// Simulated opponent poses from the start time on, paired with the same agent's log.
inline MatchedTrack match_opponent_track(const EpisodeResult& r, const Scenario& s) {
  MatchedTrack m;
  const AgentTrack* logged = s.find_track(r.opponent_id);
  if (!logged) return m;
  const long t0 = grid_index(r.start_time, s.dt);
  for (const auto& p : r.opponent_track) {
    if (grid_index(p.t, s.dt) < t0) continue;
    if (auto q = pose_at(logged->states, p.t, s.dt)) {
      m.simulated.push_back(p);
      m.logged.push_back(*q);
    }
  }
  return m;
}

inline std::pair<EfficiencyReport, NaturalnessReport> evaluate_batch(const std::vector<EpisodeResult>& results,
                                                                     const std::vector<Scenario>& reference,
                                                                     const HistogramSpec& bins = {}) {
  if (results.empty()) throw InsufficientDataError("empty result set");
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : reference) by_id[s.id] = &s;

  EfficiencyReport eff;
  NaturalnessReport nat;
  double t_sum = 0.0, v_sum = 0.0, gen_sum = 0.0, sspd_sum = 0.0, haus_sum = 0.0;
  std::vector<double> acc_sim, acc_log;
  for (const auto& r : results) {
    auto it = by_id.find(r.scenario_id);
    if (it == by_id.end()) throw Error(ErrorClass::data, "result '" + r.scenario_id + "' has no matching scenario");
    ++eff.episodes;
    gen_sum += r.generation_time;
    if (!r.valid) continue;
    ++eff.valid_episodes;
    if (r.collision.report.occurred) {
      ++eff.collisions;
      t_sum += *r.collision.report.time - r.start_time;
      v_sum += *r.collision.report.relative_speed;
    }
    const auto m = match_opponent_track(r, *it->second);
    if (m.simulated.size() >= 3) {
      for (double a : acceleration_series(m.simulated)) acc_sim.push_back(a);
      for (double a : acceleration_series(m.logged)) acc_log.push_back(a);
    }
    if (m.simulated.size() >= 2) {
      const auto a = positions_of(m.simulated);
      const auto b = positions_of(m.logged);
      sspd_sum += sspd(a, b);
      haus_sum += hausdorff(a, b);
      ++nat.trajectories;
    }
  }
  eff.mean_generation_time = gen_sum / eff.episodes;
  if (eff.valid_episodes > 0) eff.collision_rate = static_cast<double>(eff.collisions) / eff.valid_episodes;
  if (eff.collisions > 0) {
    eff.mean_collision_time = t_sum / eff.collisions;
    eff.mean_relative_speed = v_sum / eff.collisions;
  }
  if (!acc_sim.empty()) {
    nat.kl_divergence = kl_divergence(acc_sim, acc_log, bins);
    nat.wasserstein_distance = wasserstein_1d(acc_sim, acc_log);
    nat.acceleration_samples = static_cast<int>(acc_sim.size());
  }
  if (nat.trajectories > 0) {
    nat.sspd = sspd_sum / nat.trajectories;
    nat.hausdorff = haus_sum / nat.trajectories;
  }
  return {eff, nat};
}

}  // namespace advsim
