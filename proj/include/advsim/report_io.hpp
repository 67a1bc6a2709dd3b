#pragma once

// JSON and CSV forms of configs, episode results, and evaluation reports.

#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advsim/engine.hpp"
#include "advsim/evaluation.hpp"
#include "advsim/scenario_io.hpp"

namespace advsim {

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline const char* to_string(SelectionMode m) { return m == SelectionMode::argmax ? "argmax" : "sample"; }

inline SelectionMode selection_mode_from_string(const std::string& s) {
  if (s == "argmax") return SelectionMode::argmax;
  if (s == "sample") return SelectionMode::sample;
  throw ConfigError("unknown selection mode '" + s + "'");
}

inline PlannerKind planner_kind_from_string(const std::string& s) {
  if (s == "replay") return PlannerKind::replay;
  if (s == "idm") return PlannerKind::idm;
  throw ConfigError("unknown planner '" + s + "'");
}

inline json predictor_config_to_json(const PredictorConfig& c) {
  return {{"n_hypotheses", c.n_hypotheses},     {"goal_spacing", c.goal_spacing},
          {"max_lon_accel", c.max_lon_accel},   {"max_lat_accel", c.max_lat_accel},
          {"max_yaw_rate", c.max_yaw_rate},     {"lane_reach", c.lane_reach},
          {"lane_weight", c.lane_weight},       {"heading_weight", c.heading_weight},
          {"accel_weight", c.accel_weight},     {"reaction_lambda", c.reaction_lambda},
          {"score_temperature", c.score_temperature}, {"dedupe_radius", c.dedupe_radius},
          {"nms_radius", c.nms_radius}};
}

// Keys present in `j` override `base`.
inline PredictorConfig predictor_config_from_json(const json& j, PredictorConfig base = {}) {
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = j.at(key).get<double>();
  };
  if (j.contains("n_hypotheses")) base.n_hypotheses = j.at("n_hypotheses").get<int>();
  num("goal_spacing", base.goal_spacing);
  num("max_lon_accel", base.max_lon_accel);
  num("max_lat_accel", base.max_lat_accel);
  num("max_yaw_rate", base.max_yaw_rate);
  num("lane_reach", base.lane_reach);
  num("lane_weight", base.lane_weight);
  num("heading_weight", base.heading_weight);
  num("accel_weight", base.accel_weight);
  num("reaction_lambda", base.reaction_lambda);
  num("score_temperature", base.score_temperature);
  num("dedupe_radius", base.dedupe_radius);
  num("nms_radius", base.nms_radius);
  return base;
}

inline json idm_params_to_json(const IdmParams& p) {
  return {{"desired_speed", optional_to_json(p.desired_speed)},
          {"time_headway", p.time_headway},
          {"min_gap", p.min_gap},
          {"max_accel", p.max_accel},
          {"comfort_decel", p.comfort_decel},
          {"exponent", p.exponent},
          {"max_decel", p.max_decel},
          {"corridor_half_width", p.corridor_half_width},
          {"path_lost_distance", p.path_lost_distance}};
}

inline IdmParams idm_params_from_json(const json& j, IdmParams base = {}) {
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = j.at(key).get<double>();
  };
  if (j.contains("desired_speed")) base.desired_speed = optional_from_json(j.at("desired_speed"));
  num("time_headway", base.time_headway);
  num("min_gap", base.min_gap);
  num("max_accel", base.max_accel);
  num("comfort_decel", base.comfort_decel);
  num("exponent", base.exponent);
  num("max_decel", base.max_decel);
  num("corridor_half_width", base.corridor_half_width);
  num("path_lost_distance", base.path_lost_distance);
  return base;
}

inline json sim_config_to_json(const SimConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"update_cycle", std::isfinite(c.update_cycle) ? json(c.update_cycle) : json("inf")},
          {"n1", c.n1},
          {"n2", c.n2},
          {"predictor", predictor_config_to_json(c.predictor)},
          {"planner", {{"kind", to_string(c.planner.kind)}, {"idm", idm_params_to_json(c.planner.idm)}}},
          {"selection", to_string(c.selection)},
          {"selection_temperature", c.selection_temperature},
          {"seed", c.seed},
          {"future_horizon", optional_to_json(c.future_horizon)},
          {"null_adversary", c.null_adversary},
          {"opponent", c.opponent ? json(*c.opponent) : json(nullptr)}};
}

inline SimConfig sim_config_from_json(const json& j, SimConfig base = {}) {
  try {
    if (j.contains("mode")) base.set_mode(sim_mode_from_string(j.at("mode").get<std::string>()));
    if (j.contains("update_cycle") && base.mode == SimMode::custom) {
      const auto& u = j.at("update_cycle");
      base.update_cycle = u.is_string() ? std::numeric_limits<double>::infinity() : u.get<double>();
    }
    if (j.contains("n1")) base.n1 = j.at("n1").get<int>();
    if (j.contains("n2")) base.n2 = j.at("n2").get<int>();
    if (j.contains("predictor")) base.predictor = predictor_config_from_json(j.at("predictor"), base.predictor);
    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      if (p.contains("kind")) base.planner.kind = planner_kind_from_string(p.at("kind").get<std::string>());
      if (p.contains("idm")) base.planner.idm = idm_params_from_json(p.at("idm"), base.planner.idm);
    }
    if (j.contains("selection")) base.selection = selection_mode_from_string(j.at("selection").get<std::string>());
    if (j.contains("selection_temperature")) base.selection_temperature = j.at("selection_temperature").get<double>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("future_horizon")) base.future_horizon = optional_from_json(j.at("future_horizon"));
    if (j.contains("null_adversary")) base.null_adversary = j.at("null_adversary").get<bool>();
    if (j.contains("opponent"))
      base.opponent = j.at("opponent").is_null() ? std::nullopt : std::optional(j.at("opponent").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
  return base;
}

inline std::uint64_t config_digest(const SimConfig& c) { return fnv1a64(sim_config_to_json(c).dump()); }

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

inline json hypothesis_to_json(const TrajectoryHypothesis& h) {
  return {{"probability", h.probability}, {"poses", poses_to_json(h.poses)}};
}

inline json episode_to_json(const EpisodeResult& r, const SimConfig& cfg) {
  json replans = json::array();
  for (const auto& rp : r.replans)
    replans.push_back({{"t", rp.t},
                       {"chosen_index", rp.chosen_index},
                       {"collision_found", rp.collision_found},
                       {"risks", rp.risks},
                       {"chosen", hypothesis_to_json(rp.chosen)}});
  const auto& c = r.collision;
  return {{"config", sim_config_to_json(cfg)},
          {"scenario_id", r.scenario_id},
          {"seed", r.seed},
          {"valid", r.valid},
          {"error", r.error},
          {"opponent_id", r.opponent_id},
          {"opponent_scores", r.opponent_scores},
          {"collision",
           {{"occurred", c.report.occurred},
            {"time", optional_to_json(c.report.time)},
            {"relative_speed", optional_to_json(c.report.relative_speed)},
            {"with_opponent", c.with_opponent},
            {"agent_id", c.agent_id}}},
          {"replans", replans},
          {"start_time", r.start_time},
          {"end_reason", r.end_reason},
          {"plan_exhausted_steps", r.plan_exhausted_steps},
          {"ego_track", poses_to_json(r.ego_track)},
          {"opponent_track", poses_to_json(r.opponent_track)},
          {"timing", {{"generation_time_s", r.generation_time}}}};
}

inline EpisodeResult episode_from_json(const json& j) {
  try {
    EpisodeResult r;
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.valid = j.at("valid").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.opponent_id = j.at("opponent_id").get<std::string>();
    r.opponent_scores = j.at("opponent_scores").get<std::map<std::string, double>>();
    const auto& c = j.at("collision");
    r.collision.report.occurred = c.at("occurred").get<bool>();
    r.collision.report.time = optional_from_json(c.at("time"));
    r.collision.report.relative_speed = optional_from_json(c.at("relative_speed"));
    r.collision.with_opponent = c.at("with_opponent").get<bool>();
    r.collision.agent_id = c.at("agent_id").get<std::string>();
    for (const auto& rp : j.at("replans")) {
      ReplanRecord rec;
      rec.t = rp.at("t").get<double>();
      rec.chosen_index = rp.at("chosen_index").get<int>();
      rec.collision_found = rp.at("collision_found").get<bool>();
      rec.risks = rp.at("risks").get<std::vector<double>>();
      rec.chosen.probability = rp.at("chosen").at("probability").get<double>();
      rec.chosen.poses = poses_from_json(rp.at("chosen").at("poses"), "/replans/chosen/poses");
      r.replans.push_back(std::move(rec));
    }
    r.start_time = j.at("start_time").get<double>();
    r.end_reason = j.at("end_reason").get<std::string>();
    r.plan_exhausted_steps = j.at("plan_exhausted_steps").get<int>();
    r.ego_track = poses_from_json(j.at("ego_track"), "/ego_track");
    r.opponent_track = poses_from_json(j.at("opponent_track"), "/opponent_track");
    r.generation_time = j.at("timing").at("generation_time_s").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError("/", e.what());
  }
}

inline constexpr const char* kBatchCsvHeader =
    "scenario_id,seed,config_digest,mode,planner,null_adversary,opponent_id,valid,collision,collision_with_opponent,"
    "collision_agent_id,collision_time_s,relative_speed_mps,replans,plan_exhausted_steps,end_reason";

// One row per episode; wall-clock timing is left out so reruns are byte-identical.
inline std::string batch_csv(const std::vector<EpisodeResult>& results, const SimConfig& cfg) {
  std::ostringstream out;
  out << kBatchCsvHeader << '\n';
  const std::string digest = hex64(config_digest(cfg));
  for (const auto& r : results) {
    const auto& c = r.collision;
    std::optional<double> rel_t;
    if (c.report.time) rel_t = *c.report.time - r.start_time;
    out << r.scenario_id << ',' << r.seed << ',' << digest << ',' << to_string(cfg.mode) << ','
        << to_string(cfg.planner.kind) << ',' << (cfg.null_adversary ? 1 : 0) << ',' << r.opponent_id << ','
        << (r.valid ? 1 : 0) << ',' << (c.report.occurred ? 1 : 0) << ',' << (c.with_opponent ? 1 : 0) << ','
        << c.agent_id << ',' << format_optional(rel_t) << ',' << format_optional(c.report.relative_speed) << ','
        << r.replans.size() << ',' << r.plan_exhausted_steps << ',' << r.end_reason << '\n';
  }
  return out.str();
}

inline constexpr const char* kReportCsvHeader =
    "episodes,valid_episodes,collisions,collision_rate,mean_collision_time_s,mean_relative_speed_mps,"
    "mean_generation_time_s,kl_divergence,wasserstein_distance,sspd_m,hausdorff_m";

inline std::string report_csv(const EfficiencyReport& e, const NaturalnessReport& n) {
  std::ostringstream out;
  out << kReportCsvHeader << '\n'
      << e.episodes << ',' << e.valid_episodes << ',' << e.collisions << ',' << format_double(e.collision_rate) << ','
      << format_optional(e.mean_collision_time) << ',' << format_optional(e.mean_relative_speed) << ','
      << format_double(e.mean_generation_time) << ',' << format_optional(n.kl_divergence) << ','
      << format_optional(n.wasserstein_distance) << ',' << format_optional(n.sspd) << ','
      << format_optional(n.hausdorff) << '\n';
  return out.str();
}

inline json report_to_json(const EfficiencyReport& e, const NaturalnessReport& n, const HistogramSpec& bins) {
  return {{"efficiency",
           {{"episodes", e.episodes},
            {"valid_episodes", e.valid_episodes},
            {"collisions", e.collisions},
            {"collision_rate", e.collision_rate},
            {"mean_collision_time_s", optional_to_json(e.mean_collision_time)},
            {"mean_relative_speed_mps", optional_to_json(e.mean_relative_speed)},
            {"mean_generation_time_s", e.mean_generation_time}}},
          {"naturalness",
           {{"kl_divergence", optional_to_json(n.kl_divergence)},
            {"wasserstein_distance", optional_to_json(n.wasserstein_distance)},
            {"sspd_m", optional_to_json(n.sspd)},
            {"hausdorff_m", optional_to_json(n.hausdorff)},
            {"acceleration_samples", n.acceleration_samples},
            {"trajectories", n.trajectories}}},
          {"acceleration_histogram", {{"lo", bins.lo}, {"hi", bins.hi}, {"bins", bins.bins}, {"smoothing", bins.smoothing}}}};
}

}  // namespace advsim
