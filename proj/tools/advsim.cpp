// advsim: label, train, generate, evaluate, replay, plus fixture and converter utilities.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "advsim/convert.hpp"
#include "advsim/evaluation.hpp"
#include "advsim/fixtures.hpp"
#include "advsim/pipeline.hpp"
#include "advsim/plot.hpp"

namespace fs = std::filesystem;
using namespace advsim;

namespace {

int exit_code(ErrorClass c) {
  switch (c) {
    case ErrorClass::config: return 2;
    case ErrorClass::data: return 3;
    case ErrorClass::runtime: return 4;
  }
  return 4;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("advsim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("ADVSIM_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept it when asked for explicitly.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("ADVSIM_LOG='{}' is not a log level; keeping info", env);
  }
}

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::is_directory(path)) throw Error(ErrorClass::data, std::string(what) + " '" + path + "' is not a directory");
}

// ---- label -------------------------------------------------------------

struct LabelArgs {
  std::string corpus, out;
};

int cmd_label(const LabelArgs& a) {
  require_dir(a.corpus, "--corpus");
  if (a.out.empty()) throw ConfigError("--out is required");
  const auto corpus = load_corpus(a.corpus);
  const auto run = label_corpus(corpus);
  write_text_file(a.out, labels_to_jsonl(run.groups));
  const fs::path sidecar = a.out + ".failures.json";
  if (!run.failures.empty()) {
    write_text_file(sidecar, failures_to_json(run.failures));
    spdlog::warn("{} scenario(s) failed labelling, listed in {}", run.failures.size(), sidecar.string());
  } else if (fs::exists(sidecar)) {
    fs::remove(sidecar);
  }
  std::size_t positives = 0, total = 0;
  for (const auto& g : run.groups)
    for (const auto& l : g.labels) total++, positives += l.positive;
  spdlog::info("labelled {} scenarios, {} of {} agents positive -> {}", run.groups.size(), positives, total, a.out);
  return 0;
}

// ---- train -------------------------------------------------------------

struct TrainArgs {
  std::string labels, corpus, out;
  std::uint64_t seed = 0;
  TrainingHyper hyper;
};

int cmd_train(const TrainArgs& a) {
  if (a.labels.empty() || a.out.empty()) throw ConfigError("--labels and --out are required");
  require_dir(a.corpus, "--corpus");
  const auto groups = labels_from_jsonl(read_text_file(a.labels));
  const auto corpus = load_corpus(a.corpus);
  const auto data = training_set(groups, corpus);
  TrainingMetrics metrics;
  const ScorerModel model = train_scorer(data, a.hyper, a.seed, &metrics);
  write_text_file(a.out, model_to_json(model).dump(1) + "\n");
  write_text_file(a.out + ".metrics.json", training_metrics_to_json(metrics, data.size()));
  spdlog::info("trained on {} samples: loss {:.4f} -> {:.4f}, accuracy {:.3f} -> {}", data.size(), metrics.initial_loss,
               metrics.final_loss, metrics.accuracy, a.out);
  return 0;
}

// ---- generate / replay -------------------------------------------------

struct GenerateArgs {
  std::optional<std::string> corpus, out, model, config, mode, planner, select;
  std::optional<std::uint64_t> seed;
  std::optional<int> n1, n2, jobs;
  std::optional<double> lambda, temperature;
};

// Defaults, then the config file, then explicit flags.
RunConfig resolve_run_config(const GenerateArgs& a, bool null_adversary) {
  RunConfig rc;
  if (null_adversary) {
    rc.sim.null_adversary = true;
    rc.sim.planner.kind = PlannerKind::replay;
  }
  if (a.config) {
    nlohmann::json j;
    try {
      j = parse_json_text(read_text_file(*a.config), *a.config);
    } catch (const Error& e) {
      throw ConfigError(std::string("config file: ") + e.what());
    }
    rc = run_config_from_json(j, rc);
  }
  if (a.corpus) rc.corpus = *a.corpus;
  if (a.out) rc.out = *a.out;
  if (a.model) rc.model = *a.model;
  if (a.jobs) rc.jobs = *a.jobs;
  if (a.mode) rc.sim.set_mode(sim_mode_from_string(*a.mode));
  if (a.planner) rc.sim.planner.kind = planner_kind_from_string(*a.planner);
  if (a.select) rc.sim.selection = selection_mode_from_string(*a.select);
  if (a.seed) rc.sim.seed = *a.seed;
  if (a.n1) rc.sim.n1 = *a.n1;
  if (a.n2) rc.sim.n2 = *a.n2;
  if (a.lambda) rc.sim.predictor.reaction_lambda = *a.lambda;
  if (a.temperature) rc.sim.selection_temperature = *a.temperature;
  if (null_adversary) rc.sim.null_adversary = true;
  if (rc.jobs < 1) throw ConfigError("--jobs must be >= 1");
  if (rc.out.empty()) throw ConfigError("--out is required");
  if (rc.model.empty() && !rc.sim.opponent) throw ConfigError("--model is required");
  rc.sim.check();
  return rc;
}

int cmd_generate(const GenerateArgs& a, bool null_adversary) {
  const RunConfig rc = resolve_run_config(a, null_adversary);
  require_dir(rc.corpus, "--corpus");
  const auto corpus = load_corpus(rc.corpus);
  const ScorerModel model = rc.model.empty() ? ScorerModel{} : load_model(rc.model);
  spdlog::info("{} scenarios, mode {}, planner {}, seed {}, {} job(s)", corpus.size(), to_string(rc.sim.mode),
               to_string(rc.sim.planner.kind), rc.sim.seed, rc.jobs);

  const auto results = run_batch(corpus, rc.sim, model, rc.jobs);

  const fs::path out = rc.out;
  write_text_file(out / "run_config.json", run_config_to_json(rc).dump(1) + "\n");
  write_text_file(out / "batch.csv", batch_csv(results, rc.sim));
  int collisions = 0, failures = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    write_text_file(out / "episodes" / (r.scenario_id + ".json"), episode_to_json(r, rc.sim).dump(1) + "\n");
    if (r.end_reason != "error") write_text_file(out / "plots" / (r.scenario_id + ".svg"), episode_svg(corpus[i], r));
    if (!r.valid) {
      ++failures;
      spdlog::warn("{}: {}", r.scenario_id, r.error.empty() ? r.end_reason : r.error);
    }
    collisions += r.collision.report.occurred;
    spdlog::debug("{}: opponent {}, {}, {} replans", r.scenario_id, r.opponent_id, r.end_reason, r.replans.size());
  }
  spdlog::info("{} collisions in {} episodes ({} invalid) -> {}", collisions, results.size(), failures, out.string());
  return 0;
}

// ---- evaluate ----------------------------------------------------------

struct EvaluateArgs {
  std::string results, corpus, out;
};

int cmd_evaluate(const EvaluateArgs& a) {
  require_dir(a.results, "--results");
  require_dir(a.corpus, "--corpus");
  if (a.out.empty()) throw ConfigError("--out is required");
  const fs::path episodes_dir = fs::path(a.results) / "episodes";
  std::vector<fs::path> files;
  if (fs::is_directory(episodes_dir))
    for (const auto& e : fs::directory_iterator(episodes_dir))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<EpisodeResult> results;
  for (const auto& f : files) results.push_back(episode_from_json(parse_json_text(read_text_file(f), f.string())));
  const auto corpus = load_corpus(a.corpus);

  const HistogramSpec bins;
  const auto [eff, nat] = evaluate_batch(results, corpus, bins);
  auto report = report_to_json(eff, nat, bins);
  const fs::path run_config = fs::path(a.results) / "run_config.json";
  report["run_config"] = fs::exists(run_config) ? parse_json_text(read_text_file(run_config), run_config.string())
                                                : nlohmann::json(nullptr);
  const fs::path out = a.out;
  write_text_file(out / "report.json", report.dump(1) + "\n");
  write_text_file(out / "report.csv", report_csv(eff, nat));
  spdlog::info("{} episodes, collision rate {:.3f} -> {}", eff.episodes, eff.collision_rate, out.string());
  return 0;
}

// ---- fixtures / convert ------------------------------------------------

int cmd_fixtures(const std::string& out_dir) {
  if (out_dir.empty()) throw ConfigError("--out is required");
  const fs::path out = out_dir;
  for (const auto& s : fixtures::evaluation_corpus()) save_scenario(s, out / "eval" / (s.id + ".json"));
  for (const auto& s : fixtures::separable_training_corpus()) save_scenario(s, out / "training" / (s.id + ".json"));
  save_scenario(fixtures::lead_vehicle_fixture(), out / "lead_vehicle.json");
  save_scenario(fixtures::braking_ego_fixture(), out / "braking_ego.json");
  spdlog::info("fixtures written to {}", out.string());
  return 0;
}

int cmd_convert(const std::string& in, const std::string& out) {
  if (in.empty() || out.empty()) throw ConfigError("--in and --out are required");
  const Scenario s = convert_motion_record(parse_json_text(read_text_file(in), in));
  save_scenario(s, out);
  spdlog::info("{}: {} tracks, {} lanes -> {}", s.id, s.tracks.size(), s.map.lane_centerlines.size(), out);
  return 0;
}

void add_generate_flags(CLI::App* c, GenerateArgs& g) {
  c->add_option("--corpus", g.corpus, "Scenario directory");
  c->add_option("--out", g.out, "Output directory");
  c->add_option("--model", g.model, "Scorer model file");
  c->add_option("--config", g.config, "Run config JSON (flags override it)");
  c->add_option("--mode", g.mode, "Replan mode")->check(CLI::IsMember({"g", "s1", "s2", "s4"}));
  c->add_option("--planner", g.planner, "Ego planner")->check(CLI::IsMember({"replay", "idm"}));
  c->add_option("--select", g.select, "Opponent selection")->check(CLI::IsMember({"argmax", "sample"}));
  c->add_option("--seed", g.seed, "Global seed");
  c->add_option("--n1", g.n1, "Opponent hypotheses");
  c->add_option("--n2", g.n2, "Ego hypotheses per opponent hypothesis");
  c->add_option("--lambda", g.lambda, "Conditional reaction strength");
  c->add_option("--temperature", g.temperature, "Opponent selection temperature");
  c->add_option("--jobs", g.jobs, "Worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Adversarial closed-loop scenario generation"};
  app.require_subcommand(1);

  LabelArgs label;
  auto* c_label = app.add_subcommand("label", "Pseudo-label interacting agents");
  c_label->add_option("--corpus", label.corpus, "Scenario directory")->required();
  c_label->add_option("--out", label.out, "Labels file (JSON lines)")->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train the opponent scorer");
  c_train->add_option("--labels", train.labels, "Labels file")->required();
  c_train->add_option("--corpus", train.corpus, "Scenario directory")->required();
  c_train->add_option("--out", train.out, "Model file")->required();
  c_train->add_option("--seed", train.seed, "Initialization seed");
  c_train->add_option("--epochs", train.hyper.epochs, "Full-batch epochs");
  c_train->add_option("--learning-rate", train.hyper.learning_rate, "Adam step size");
  c_train->add_option("--alpha", train.hyper.alpha, "Focal loss alpha");
  c_train->add_option("--gamma", train.hyper.gamma, "Focal loss gamma");
  c_train->add_option("--hidden", train.hyper.hidden, "Hidden units");

  GenerateArgs gen, rep;
  auto* c_gen = app.add_subcommand("generate", "Run adversarial episodes over a corpus");
  add_generate_flags(c_gen, gen);
  auto* c_rep = app.add_subcommand("replay", "Run the null-adversary baseline");
  add_generate_flags(c_rep, rep);

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Efficiency and naturalness reports");
  c_eval->add_option("--results", eval.results, "Generate output directory")->required();
  c_eval->add_option("--corpus", eval.corpus, "Reference scenario directory")->required();
  c_eval->add_option("--out", eval.out, "Report directory")->required();

  std::string fixtures_out;
  auto* c_fix = app.add_subcommand("fixtures", "Write the built-in synthetic corpora");
  c_fix->add_option("--out", fixtures_out, "Output directory")->required();

  std::string conv_in, conv_out;
  auto* c_conv = app.add_subcommand("convert", "Convert a motion-dataset JSON record");
  c_conv->add_option("--in", conv_in, "Input record")->required();
  c_conv->add_option("--out", conv_out, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_label) return cmd_label(label);
    if (*c_train) return cmd_train(train);
    if (*c_gen) return cmd_generate(gen, false);
    if (*c_rep) return cmd_generate(rep, true);
    if (*c_eval) return cmd_evaluate(eval);
    if (*c_fix) return cmd_fixtures(fixtures_out);
    if (*c_conv) return cmd_convert(conv_in, conv_out);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 4;
  }
  return 0;
}
