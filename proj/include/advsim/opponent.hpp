#pragma once

// Opponent assignment: heuristic interaction labels, hand-designed interaction
// features, a focal-loss-trained perceptron scorer, and OV selection.

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "advsim/error.hpp"
#include "advsim/geometry.hpp"
#include "advsim/random.hpp"
#include "advsim/scenario.hpp"

namespace advsim {

struct InteractionLabel {
  std::string agent_id;
  bool positive = false;
  bool operator==(const InteractionLabel&) const = default;
};

namespace opponent_detail {

inline double bounding_radius(const AgentTrack& tr) { return 0.5 * std::hypot(tr.length, tr.width); }

// Path-region overlap: some box of `a` meets some box of `b`, regardless of time.
inline bool path_regions_overlap(const AgentTrack& a, const AgentTrack& b) {
  const double reach = bounding_radius(a) + bounding_radius(b);
  const BoxDims da{a.length, a.width};
  const BoxDims db{b.length, b.width};
  for (const auto& pa : a.states) {
    const OrientedBox ba = box_at(pa, da);
    for (const auto& pb : b.states) {
      if (distance(pa.position(), pb.position()) > reach) continue;
      if (boxes_intersect(ba, box_at(pb, db))) return true;
    }
  }
  return false;
}

inline bool ever_closer_than(const AgentTrack& a, const AgentTrack& b, double threshold, double dt) {
  for (const auto& pa : a.states) {
    if (auto pb = pose_at(b.states, pa.t, dt); pb && distance(pa.position(), pb->position()) < threshold) return true;
  }
  return false;
}

}  // namespace opponent_detail

// One label per SV, in track order. Needs the logged future (training-time only).
inline std::vector<InteractionLabel> generate_labels(const Scenario& s) {
  const AgentTrack& ego = s.ego();
  const double history_end = s.start_time() + s.history_horizon;
  if (ego.states.back().t <= history_end + kTimeEps)
    throw InsufficientDataError("scenario '" + s.id + "' has no future data for the ego");
  std::vector<InteractionLabel> labels;
  for (const auto& tr : s.tracks) {
    if (tr.id == s.ego_id) continue;
    const bool positive = opponent_detail::path_regions_overlap(ego, tr) ||
                          opponent_detail::ever_closer_than(ego, tr, ego.length, s.dt);
    labels.push_back({tr.id, positive});
  }
  return labels;
}

inline constexpr std::size_t kFeatureCount = 8;
using FeatureVector = std::array<double, kFeatureCount>;

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "rel_longitudinal_m", "rel_lateral_m", "rel_heading_rad", "rel_speed_mps",
    "closing_speed_mps",  "distance_m",    "same_lane",       "time_to_closest_approach_s"};

inline constexpr double kMaxClosestApproachTime = 8.0;

// Index of the lane centerline nearest to `p`, or -1 without lanes.
inline int nearest_lane(const MapGraph& map, Vec2 p) {
  int best = -1;
  double best_d = INFINITY;
  for (std::size_t i = 0; i < map.lane_centerlines.size(); ++i) {
    const double d = point_to_polyline_distance(p, map.lane_centerlines[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// Interaction features of SV `sv_id` relative to the ego, from the latest observed poses.
inline FeatureVector extract_features(const Scenario& obs, const std::string& sv_id) {
  const AgentTrack* sv = obs.find_track(sv_id);
  if (!sv) throw ValidationError(sv_id, 0.0, "unknown agent_id");
  if (sv->states.size() < 2) throw InsufficientDataError("agent '" + sv_id + "' has fewer than 2 history states");
  const Pose& e = obs.ego().states.back();
  const Pose& o = sv->states.back();

  const Vec2 fwd = unit_from_heading(e.heading);
  const Vec2 r = o.position() - e.position();
  const Vec2 v_rel = o.velocity() - e.velocity();
  const double dist = r.norm();
  const double v2 = v_rel.squared_norm();

  FeatureVector f{};
  f[0] = dot(r, fwd);
  f[1] = cross(fwd, r);
  f[2] = angle_diff(o.heading, e.heading);
  f[3] = o.speed - e.speed;
  f[4] = dist > 0.0 ? -dot(r, v_rel) / dist : 0.0;
  f[5] = dist;
  const int lane_e = nearest_lane(obs.map, e.position());
  f[6] = (lane_e >= 0 && lane_e == nearest_lane(obs.map, o.position())) ? 1.0 : 0.0;
  f[7] = v2 > 1e-12 ? std::clamp(-dot(r, v_rel) / v2, 0.0, kMaxClosestApproachTime) : 0.0;
  return f;
}

inline constexpr double kProbabilityClamp = 1e-7;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// -alpha_t (1 - p_t)^gamma log(p_t), p_t = p for y = 1 and 1 - p otherwise.
// p is clamped to [1e-7, 1 - 1e-7].
inline double focal_loss(double p, int y, double alpha_t, double gamma) {
  p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double pt = y == 1 ? p : 1.0 - p;
  return -alpha_t * std::pow(1.0 - pt, gamma) * std::log(pt);
}

// d(focal_loss)/dz for p = sigmoid(z).
inline double focal_loss_grad_logit(double p, int y, double alpha_t, double gamma) {
  p = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double pt = y == 1 ? p : 1.0 - p;
  const double sign = y == 1 ? 1.0 : -1.0;
  return sign * alpha_t * std::pow(1.0 - pt, gamma) * (gamma * pt * std::log(pt) - (1.0 - pt));
}

struct TrainingHyper {
  double alpha = 0.25;  // alpha_t = alpha for positives, 1 - alpha for negatives
  double gamma = 2.0;
  double learning_rate = 0.01;
  int epochs = 1500;
  int hidden = 16;
  bool operator==(const TrainingHyper&) const = default;
};

inline double alpha_for(int y, double alpha) { return y == 1 ? alpha : 1.0 - alpha; }

// Two-layer perceptron: standardized input -> tanh(hidden) -> sigmoid.
struct ScorerModel {
  static constexpr int kSchemaVersion = 1;

  int input_dim = static_cast<int>(kFeatureCount);
  int hidden_dim = 16;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::vector<double> w1;  // hidden_dim x input_dim, row-major
  std::vector<double> b1;
  std::vector<double> w2;  // hidden_dim
  double b2 = 0.0;
  TrainingHyper hyper;
  std::uint64_t seed = 0;

  bool operator==(const ScorerModel&) const = default;

  double logit(const FeatureVector& f, std::vector<double>* hidden_out = nullptr) const {
    double z = b2;
    if (hidden_out) hidden_out->assign(static_cast<std::size_t>(hidden_dim), 0.0);
    for (int h = 0; h < hidden_dim; ++h) {
      double a = b1[h];
      for (int i = 0; i < input_dim; ++i)
        a += w1[h * input_dim + i] * (f[i] - feature_mean[i]) / feature_scale[i];
      const double act = std::tanh(a);
      if (hidden_out) (*hidden_out)[h] = act;
      z += w2[h] * act;
    }
    return z;
  }

  double predict(const FeatureVector& f) const {
    return std::clamp(sigmoid(logit(f)), kProbabilityClamp, 1.0 - kProbabilityClamp);
  }
};

struct LabeledFeatures {
  FeatureVector features{};
  int label = 0;
};

struct TrainingMetrics {
  std::vector<double> loss_curve;  // mean focal loss per epoch, before the update
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double accuracy = 0.0;
};

inline double mean_focal_loss(const ScorerModel& m, const std::vector<LabeledFeatures>& corpus) {
  double sum = 0.0;
  for (const auto& s : corpus) sum += focal_loss(m.predict(s.features), s.label, alpha_for(s.label, m.hyper.alpha), m.hyper.gamma);
  return sum / static_cast<double>(corpus.size());
}

inline double accuracy(const ScorerModel& m, const std::vector<LabeledFeatures>& corpus) {
  if (corpus.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : corpus) hits += ((m.predict(s.features) >= 0.5) == (s.label == 1));
  return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

// Full-batch training with Adam steps on the mean focal loss. Deterministic given the seed.
inline ScorerModel train_scorer(const std::vector<LabeledFeatures>& corpus, const TrainingHyper& hyper,
                                std::uint64_t seed, TrainingMetrics* metrics = nullptr) {
  if (corpus.empty()) throw DegenerateCorpusError("empty training corpus");
  std::size_t positives = 0;
  for (const auto& s : corpus) positives += (s.label == 1);
  if (positives == 0 || positives == corpus.size()) throw DegenerateCorpusError("training corpus has a single class");
  if (hyper.hidden < 1 || hyper.epochs < 0 || !(hyper.learning_rate > 0.0) || hyper.gamma < 0.0)
    throw ConfigError("invalid training hyperparameters");

  const int in = static_cast<int>(kFeatureCount);
  const int hid = hyper.hidden;
  const double n = static_cast<double>(corpus.size());
  ScorerModel m;
  m.input_dim = in;
  m.hidden_dim = hid;
  m.hyper = hyper;
  m.seed = seed;
  m.feature_mean.assign(in, 0.0);
  m.feature_scale.assign(in, 1.0);
  for (const auto& s : corpus)
    for (int i = 0; i < in; ++i) m.feature_mean[i] += s.features[i] / n;
  for (int i = 0; i < in; ++i) {
    double var = 0.0;
    for (const auto& s : corpus) var += std::pow(s.features[i] - m.feature_mean[i], 2) / n;
    m.feature_scale[i] = var > 1e-18 ? std::sqrt(var) : 1.0;
  }

  Rng rng(seed);
  const double lim1 = std::sqrt(6.0 / (in + hid));
  const double lim2 = std::sqrt(6.0 / (hid + 1));
  m.w1.resize(static_cast<std::size_t>(hid * in));
  for (auto& w : m.w1) w = rng.uniform(-lim1, lim1);
  m.b1.assign(hid, 0.0);
  m.w2.resize(hid);
  for (auto& w : m.w2) w = rng.uniform(-lim2, lim2);
  m.b2 = 0.0;

  // Flat parameter layout: w1 | b1 | w2 | b2.
  const std::size_t np = m.w1.size() + m.b1.size() + m.w2.size() + 1;
  std::vector<double> grad(np), mom(np, 0.0), vel(np, 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::vector<double> hidden;
  std::vector<double> x(in);

  TrainingMetrics local;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (const auto& s : corpus) {
      for (int i = 0; i < in; ++i) x[i] = (s.features[i] - m.feature_mean[i]) / m.feature_scale[i];
      const double z = m.logit(s.features, &hidden);
      const double p = sigmoid(z);
      const double at = alpha_for(s.label, hyper.alpha);
      loss += focal_loss(p, s.label, at, hyper.gamma);
      const double dz = focal_loss_grad_logit(p, s.label, at, hyper.gamma) / n;
      const std::size_t off_b1 = m.w1.size();
      const std::size_t off_w2 = off_b1 + m.b1.size();
      for (int h = 0; h < hid; ++h) {
        grad[off_w2 + h] += dz * hidden[h];
        const double da = dz * m.w2[h] * (1.0 - hidden[h] * hidden[h]);
        grad[off_b1 + h] += da;
        for (int i = 0; i < in; ++i) grad[h * in + i] += da * x[i];
      }
      grad[np - 1] += dz;
    }
    local.loss_curve.push_back(loss / n);

    const double t = epoch + 1;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    auto param = [&](std::size_t k) -> double& {
      if (k < m.w1.size()) return m.w1[k];
      k -= m.w1.size();
      if (k < m.b1.size()) return m.b1[k];
      k -= m.b1.size();
      if (k < m.w2.size()) return m.w2[k];
      return m.b2;
    };
    for (std::size_t k = 0; k < np; ++k) {
      mom[k] = beta1 * mom[k] + (1.0 - beta1) * grad[k];
      vel[k] = beta2 * vel[k] + (1.0 - beta2) * grad[k] * grad[k];
      param(k) -= hyper.learning_rate * (mom[k] / c1) / (std::sqrt(vel[k] / c2) + adam_eps);
    }
  }

  local.initial_loss = local.loss_curve.empty() ? mean_focal_loss(m, corpus) : local.loss_curve.front();
  local.final_loss = mean_focal_loss(m, corpus);
  local.accuracy = accuracy(m, corpus);
  if (metrics) *metrics = std::move(local);
  return m;
}

inline nlohmann::json model_to_json(const ScorerModel& m) {
  return {{"schema_version", ScorerModel::kSchemaVersion},
          {"input_dim", m.input_dim},
          {"hidden_dim", m.hidden_dim},
          {"feature_names", kFeatureNames},
          {"feature_mean", m.feature_mean},
          {"feature_scale", m.feature_scale},
          {"w1", m.w1},
          {"b1", m.b1},
          {"w2", m.w2},
          {"b2", m.b2},
          {"hyper",
           {{"alpha", m.hyper.alpha},
            {"gamma", m.hyper.gamma},
            {"learning_rate", m.hyper.learning_rate},
            {"epochs", m.hyper.epochs},
            {"hidden", m.hyper.hidden}}},
          {"seed", m.seed}};
}

inline ScorerModel model_from_json(const nlohmann::json& j) {
  auto field = [&](const char* key) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("/") + key, "missing field");
    return j.at(key);
  };
  try {
    if (field("schema_version").get<int>() != ScorerModel::kSchemaVersion)
      throw ParseError("/schema_version", "unsupported schema version");
    ScorerModel m;
    m.input_dim = field("input_dim").get<int>();
    m.hidden_dim = field("hidden_dim").get<int>();
    m.feature_mean = field("feature_mean").get<std::vector<double>>();
    m.feature_scale = field("feature_scale").get<std::vector<double>>();
    m.w1 = field("w1").get<std::vector<double>>();
    m.b1 = field("b1").get<std::vector<double>>();
    m.w2 = field("w2").get<std::vector<double>>();
    m.b2 = field("b2").get<double>();
    const auto& h = field("hyper");
    m.hyper.alpha = h.at("alpha").get<double>();
    m.hyper.gamma = h.at("gamma").get<double>();
    m.hyper.learning_rate = h.at("learning_rate").get<double>();
    m.hyper.epochs = h.at("epochs").get<int>();
    m.hyper.hidden = h.at("hidden").get<int>();
    m.seed = field("seed").get<std::uint64_t>();
    const auto in = static_cast<std::size_t>(m.input_dim);
    const auto hid = static_cast<std::size_t>(m.hidden_dim);
    if (in != kFeatureCount || m.feature_mean.size() != in || m.feature_scale.size() != in ||
        m.w1.size() != in * hid || m.b1.size() != hid || m.w2.size() != hid)
      throw ParseError("/w1", "layer dimensions do not match weight arrays");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("/", e.what());
  }
}

enum class SelectionMode { argmax, sample };

struct AdversarialScoreSet {
  std::map<std::string, double> scores;  // ordered by agent_id
  std::string selected;
};

// SVs present at the ego's latest timestamp with at least 2 history states.
inline std::vector<std::string> eligible_opponents(const Scenario& obs) {
  const double t_now = obs.ego().states.back().t;
  std::vector<std::string> out;
  for (const auto& tr : obs.tracks) {
    if (tr.id == obs.ego_id || tr.states.size() < 2) continue;
    if (std::abs(tr.states.back().t - t_now) > 0.5 * obs.dt) continue;
    out.push_back(tr.id);
  }
  return out;
}

// Argmax with lexicographic tie-break, or a draw from softmax(s / temperature).
inline std::string select_from_scores(const std::map<std::string, double>& scores, SelectionMode mode,
                                      double temperature, std::uint64_t seed) {
  if (scores.empty()) throw NoOpponentError("no eligible surrounding vehicle");
  if (mode == SelectionMode::argmax) {
    auto best = scores.begin();
    for (auto it = scores.begin(); it != scores.end(); ++it)
      if (it->second > best->second) best = it;
    return best->first;
  }
  if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be > 0");
  double top = -INFINITY;
  for (const auto& [id, s] : scores) top = std::max(top, s / temperature);
  std::vector<double> w;
  double total = 0.0;
  for (const auto& [id, s] : scores) {
    w.push_back(std::exp(s / temperature - top));
    total += w.back();
  }
  Rng rng(seed);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t i = 0;
  for (auto it = scores.begin(); it != scores.end(); ++it, ++i) {
    acc += w[i];
    if (u < acc) return it->first;
  }
  return scores.rbegin()->first;
}

inline AdversarialScoreSet score_and_select(const Scenario& obs, const ScorerModel& model, SelectionMode mode,
                                            double temperature, std::uint64_t seed) {
  AdversarialScoreSet out;
  for (const auto& id : eligible_opponents(obs)) out.scores[id] = model.predict(extract_features(obs, id));
  if (out.scores.empty()) throw NoOpponentError("scenario '" + obs.id + "' has no eligible surrounding vehicle");
  out.selected = select_from_scores(out.scores, mode, temperature, seed);
  return out;
}

}  // namespace advsim
