#pragma once

// Corpus-level steps behind the CLI: labelling, training-set assembly, and run configs.

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "advsim/engine.hpp"
#include "advsim/opponent.hpp"
#include "advsim/report_io.hpp"
#include "advsim/scenario_io.hpp"

namespace advsim {

struct LabelGroup {
  std::string scenario_id;
  std::vector<InteractionLabel> labels;
};

struct LabelFailure {
  std::string scenario_id;
  std::string error;
};

struct LabelRun {
  std::vector<LabelGroup> groups;
  std::vector<LabelFailure> failures;
};

inline LabelRun label_corpus(const std::vector<Scenario>& corpus) {
  if (corpus.empty()) throw InsufficientDataError("empty corpus");
  LabelRun run;
  for (const auto& s : corpus) {
    try {
      run.groups.push_back({s.id, generate_labels(s)});
    } catch (const Error& e) {
      run.failures.push_back({s.id, e.what()});
    }
  }
  return run;
}

// One JSON object per line: {"scenario_id", "labels": [{"agent_id", "positive"}]}.
inline std::string labels_to_jsonl(const std::vector<LabelGroup>& groups) {
  std::string out;
  for (const auto& g : groups) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& l : g.labels) labels.push_back({{"agent_id", l.agent_id}, {"positive", l.positive}});
    out += nlohmann::json{{"scenario_id", g.scenario_id}, {"labels", labels}}.dump() + "\n";
  }
  return out;
}

inline std::vector<LabelGroup> labels_from_jsonl(const std::string& text) {
  std::vector<LabelGroup> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto j = parse_json_text(line, "line " + std::to_string(n));
    try {
      LabelGroup g;
      g.scenario_id = j.at("scenario_id").get<std::string>();
      for (const auto& l : j.at("labels")) g.labels.push_back({l.at("agent_id").get<std::string>(), l.at("positive").get<bool>()});
      out.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(n), e.what());
    }
  }
  return out;
}

inline std::string failures_to_json(const std::vector<LabelFailure>& failures) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : failures) j.push_back({{"scenario_id", f.scenario_id}, {"error", f.error}});
  return j.dump(1) + "\n";
}

// Features at the end of each scenario's history window, paired with the labels.
inline std::vector<LabeledFeatures> training_set(const std::vector<LabelGroup>& groups, const std::vector<Scenario>& corpus) {
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : corpus) by_id[s.id] = &s;
  std::vector<LabeledFeatures> out;
  for (const auto& g : groups) {
    auto it = by_id.find(g.scenario_id);
    if (it == by_id.end()) throw Error(ErrorClass::data, "labels reference unknown scenario '" + g.scenario_id + "'");
    const Scenario& s = *it->second;
    const Scenario obs = slice_observation(s, s.start_time() + s.history_horizon);
    for (const auto& l : g.labels) {
      const AgentTrack* tr = obs.find_track(l.agent_id);
      if (!tr || tr->states.size() < 2) continue;
      out.push_back({extract_features(obs, l.agent_id), l.positive ? 1 : 0});
    }
  }
  return out;
}

inline std::string training_metrics_to_json(const TrainingMetrics& m, std::size_t samples) {
  nlohmann::json j{{"samples", samples},
                   {"initial_loss", m.initial_loss},
                   {"final_loss", m.final_loss},
                   {"accuracy", m.accuracy},
                   {"loss_curve", m.loss_curve}};
  return j.dump(1) + "\n";
}

// Everything a generate/replay run depends on; written next to its outputs and readable by --config.
struct RunConfig {
  std::string corpus;
  std::string out;
  std::string model;
  SimConfig sim;
  int jobs = 1;
};

inline nlohmann::json run_config_to_json(const RunConfig& r) {
  return {{"corpus", r.corpus}, {"out", r.out}, {"model", r.model}, {"jobs", r.jobs}, {"sim", sim_config_to_json(r.sim)}};
}

// Keys present in `j` override `base`.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  try {
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    if (j.contains("corpus")) base.corpus = j.at("corpus").get<std::string>();
    if (j.contains("out")) base.out = j.at("out").get<std::string>();
    if (j.contains("model")) base.model = j.at("model").get<std::string>();
    if (j.contains("jobs")) base.jobs = j.at("jobs").get<int>();
    if (j.contains("sim")) base.sim = sim_config_from_json(j.at("sim"), base.sim);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  return base;
}

inline ScorerModel load_model(const std::filesystem::path& path) {
  return model_from_json(parse_json_text(read_text_file(path), path.string()));
}

}  // namespace advsim
