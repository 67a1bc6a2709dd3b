#include <gtest/gtest.h>

#include <cmath>

#include "advsim/fixtures.hpp"
#include "advsim/pipeline.hpp"
#include "oracles.hpp"

using namespace advsim;
namespace fx = advsim::fixtures;

namespace {

const std::filesystem::path kData = ADVSIM_DATA_DIR;

std::vector<LabeledFeatures> separable_data() {
  const auto corpus = fx::separable_training_corpus();
  return training_set(label_corpus(corpus).groups, corpus);
}

const InteractionLabel& label_of(const std::vector<InteractionLabel>& ls, const std::string& id) {
  for (const auto& l : ls)
    if (l.agent_id == id) return l;
  throw std::runtime_error("no label for " + id);
}

Scenario rigid_moved(Scenario s, double th, Vec2 shift) {
  auto move = [&](Vec2 p) { return rotate(p, th) + shift; };
  for (auto& l : s.map.lane_centerlines)
    for (auto& p : l) p = move(p);
  for (auto& l : s.map.drivable_polygons)
    for (auto& p : l) p = move(p);
  for (auto& tr : s.tracks)
    for (auto& p : tr.states) {
      const Vec2 q = move(p.position());
      p.x = q.x, p.y = q.y;
      p.heading = normalize_angle(p.heading + th);
    }
  return s;
}

}  // namespace

TEST(GenerateLabels, SameLaneFollowerIsPositive) {
  const Scenario s = fx::rear_follower("f", 5.0, 12.0);
  EXPECT_TRUE(label_of(generate_labels(s), "follower").positive);
}

TEST(GenerateLabels, SideBySideInAdjacentLaneIsPositive) {
  // Lateral centre gap 3.5 m < ego length 4.8 m while abreast.
  const Scenario s = fx::adjacent("a", 0.0, 12.0, 12.0);
  const auto labels = generate_labels(s);
  EXPECT_TRUE(label_of(labels, "neighbour").positive);
  EXPECT_FALSE(label_of(labels, "far").positive);
}

TEST(GenerateLabels, ParallelRoadFarAwayIsNegative) {
  using namespace fx;
  const Scenario s = make_scenario("p", highway_map(1), {eastbound("ego", 0, 0, 12), bystander("far", 0, 12)});
  EXPECT_FALSE(label_of(generate_labels(s), "far").positive);
}

TEST(GenerateLabels, OneLabelPerSurroundingVehicle) {
  for (const auto& s : fx::evaluation_corpus()) EXPECT_EQ(generate_labels(s).size(), s.tracks.size() - 1);
}

TEST(GenerateLabels, NoFutureIsInsufficientData) {
  const Scenario s = fx::lead("l", 10, 12);
  EXPECT_THROW(generate_labels(slice_observation(s, 1.0)), InsufficientDataError);
}

TEST(GenerateLabels, RigidTransformInvariant) {
  for (const auto& s : fx::evaluation_corpus()) {
    const auto a = generate_labels(s);
    const auto b = generate_labels(rigid_moved(s, 0.7, {120, -35}));
    EXPECT_EQ(a, b) << s.id;
  }
}

TEST(ExtractFeatures, IdenticalPoseGivesZeroDistanceAndHeading) {
  using namespace fx;
  const Scenario s = make_scenario("same", highway_map(2),
                                   {eastbound("ego", 0, 0, 10), eastbound("twin", 0, 0, 10)});
  const auto f = extract_features(slice_observation(s, 1.0), "twin");
  EXPECT_EQ(f[5], 0.0);
  EXPECT_EQ(f[2], 0.0);
  EXPECT_EQ(f[6], 1.0);
}

TEST(ExtractFeatures, LeaderTwentyMetresAheadAtEqualSpeed) {
  using namespace fx;
  const Scenario s = make_scenario("lead20", highway_map(2),
                                   {eastbound("ego", 0, 0, 12), eastbound("lead", 0, 20, 12)});
  const auto f = extract_features(slice_observation(s, 1.0), "lead");
  EXPECT_NEAR(f[0], 20.0, 1e-9);
  EXPECT_NEAR(f[1], 0.0, 1e-9);
  EXPECT_NEAR(f[4], 0.0, 1e-9);
  EXPECT_NEAR(f[3], 0.0, 1e-12);
  EXPECT_EQ(f[6], 1.0);
}

TEST(ExtractFeatures, MatchesStraightLineReimplementation) {
  Rng rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    const double eh = rng.uniform(-3.1, 3.1), oh = rng.uniform(-3.1, 3.1);
    const double ex = rng.uniform(-20, 20), ey = rng.uniform(-20, 20), ox = rng.uniform(-40, 40), oy = rng.uniform(-40, 40);
    const double ev = rng.uniform(0, 20), ov = rng.uniform(0, 20);
    Scenario s;
    s.ego_id = "ego";
    s.map.lane_centerlines = {{{-100, 0}, {100, 0}}, {{-100, 10}, {100, 10}}};
    s.tracks = {{"ego", 4.8, 2.0, {{0.0, ex - 1, ey, eh, ev}, {0.1, ex, ey, eh, ev}}},
                {"sv", 4.5, 1.9, {{0.0, ox - 1, oy, oh, ov}, {0.1, ox, oy, oh, ov}}}};
    const auto f = extract_features(s, "sv");

    // Written out component by component.
    const double c = std::cos(eh), sn = std::sin(eh);
    const double rx = ox - ex, ry = oy - ey;
    const double vrx = ov * std::cos(oh) - ev * c, vry = ov * std::sin(oh) - ev * sn;
    const double d = std::sqrt(rx * rx + ry * ry);
    double dh = oh - eh;
    while (dh > M_PI) dh -= 2 * M_PI;
    while (dh <= -M_PI) dh += 2 * M_PI;
    const double v2 = vrx * vrx + vry * vry;
    const double tca = v2 > 1e-12 ? std::min(8.0, std::max(0.0, -(rx * vrx + ry * vry) / v2)) : 0.0;
    auto lane_of = [](double y) { return std::abs(y) <= std::abs(y - 10) ? 0 : 1; };
    EXPECT_NEAR(f[0], rx * c + ry * sn, 1e-9);
    EXPECT_NEAR(f[1], -rx * sn + ry * c, 1e-9);
    EXPECT_NEAR(f[2], dh, 1e-9);
    EXPECT_NEAR(f[3], ov - ev, 1e-12);
    EXPECT_NEAR(f[4], d > 0 ? -(rx * vrx + ry * vry) / d : 0.0, 1e-9);
    EXPECT_NEAR(f[5], d, 1e-9);
    // Lane membership by nearest line; both lines are long enough that x never matters.
    EXPECT_EQ(f[6], lane_of(ey) == lane_of(oy) ? 1.0 : 0.0);
    EXPECT_NEAR(f[7], tca, 1e-9);
  }
}

TEST(ExtractFeatures, Errors) {
  const Scenario s = fx::lead("l", 10, 12);
  EXPECT_THROW(extract_features(s, "nobody"), ValidationError);
  const Scenario one = slice_observation(s, 0.0);
  EXPECT_THROW(extract_features(one, "leader"), InsufficientDataError);
}

TEST(FocalLoss, WorkedValues) {
  EXPECT_NEAR(focal_loss(0.5, 1, 1.0, 0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss(0.5, 1, 0.25, 2.0), 0.25 * 0.25 * std::log(2.0), 1e-15);
  EXPECT_NEAR(focal_loss(0.9, 0, 0.75, 2.0), -0.75 * 0.81 * std::log(0.1), 1e-14);
}

TEST(FocalLoss, ReducesToCrossEntropy) {
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform(1e-4, 1 - 1e-4);
    const int y = static_cast<int>(rng.below(2));
    EXPECT_NEAR(focal_loss(p, y, 1.0, 0.0), -std::log(y ? p : 1 - p), 1e-12);
  }
}

TEST(FocalLoss, NonnegativeAndMonotoneInPt) {
  Rng rng(32);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.uniform(0.01, 1), g = rng.uniform(0, 5);
    const double p1 = rng.uniform(0.01, 0.98), p2 = p1 + rng.uniform(0.001, 0.99 - p1);
    EXPECT_GE(focal_loss(p1, 1, a, g), 0.0);
    EXPECT_GE(focal_loss(p1, 1, a, g), focal_loss(p2, 1, a, g));
    EXPECT_GE(focal_loss(1 - p1, 0, a, g), focal_loss(1 - p2, 0, a, g));
  }
}

TEST(FocalLoss, EdgeProbabilitiesAreClamped) {
  EXPECT_TRUE(std::isfinite(focal_loss(0.0, 1, 0.25, 2.0)));
  EXPECT_TRUE(std::isfinite(focal_loss(1.0, 0, 0.25, 2.0)));
  EXPECT_NEAR(focal_loss(0.0, 1, 1.0, 0.0), -std::log(1e-7), 1e-9);
}

TEST(FocalLoss, GradientMatchesCentralDifferences) {
  Rng rng(33);
  for (int i = 0; i < 1000; ++i) {
    const double z = rng.uniform(-6, 6), a = rng.uniform(0.05, 0.95), g = rng.uniform(0, 4);
    const int y = static_cast<int>(rng.below(2));
    auto f = [&](double x) { return focal_loss(sigmoid(x), y, a, g); };
    auto fd = [&](double h) { return (-f(z + 2 * h) + 8 * f(z + h) - 8 * f(z - h) + f(z - 2 * h)) / (12 * h); };
    const double d1 = fd(1e-3), d2 = fd(5e-4);
    const double num = d2 + (d2 - d1) / 15.0;
    EXPECT_LE(std::abs(focal_loss_grad_logit(sigmoid(z), y, a, g) - num), 1e-6 * std::abs(num));
  }
}

TEST(TrainScorer, SeparableCorpusReachesHighAccuracy) {
  const auto data = separable_data();
  TrainingMetrics m;
  const auto model = train_scorer(data, {}, 1, &m);
  EXPECT_GE(m.accuracy, 0.95);
  EXPECT_LT(m.final_loss, m.initial_loss);
  EXPECT_EQ(m.loss_curve.size(), 1500u);
  EXPECT_DOUBLE_EQ(accuracy(model, data), m.accuracy);
}

TEST(TrainScorer, DeterministicForSeed) {
  const auto data = separable_data();
  const auto a = train_scorer(data, {}, 42);
  const auto b = train_scorer(data, {}, 42);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, train_scorer(data, {}, 43));
}

TEST(TrainScorer, IdenticalConflictingPairPlateausWithoutFailure) {
  FeatureVector f{};
  f[0] = 3.0;
  TrainingHyper h;
  h.epochs = 300;
  TrainingMetrics m;
  const auto model = train_scorer({{f, 1}, {f, 0}}, h, 0, &m);
  EXPECT_TRUE(std::isfinite(m.final_loss));
  EXPECT_LE(m.final_loss, m.initial_loss + 1e-12);
  const double p = model.predict(f);
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
}

TEST(TrainScorer, SingleClassIsDegenerate) {
  FeatureVector f{};
  EXPECT_THROW(train_scorer({{f, 1}, {f, 1}}, {}, 0), DegenerateCorpusError);
  EXPECT_THROW(train_scorer({}, {}, 0), DegenerateCorpusError);
}

TEST(ScorerModel, OutputInOpenUnitIntervalAndJsonRoundTrip) {
  const auto model = train_scorer(separable_data(), {}, 1);
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    FeatureVector f;
    for (auto& x : f) x = rng.uniform(-1e3, 1e3);
    const double p = model.predict(f);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  EXPECT_EQ(model_from_json(model_to_json(model)), model);
  auto j = model_to_json(model);
  j["schema_version"] = 99;
  EXPECT_THROW(model_from_json(j), Error);
}

TEST(ScoreAndSelect, ArgmaxPicksHighest) {
  const std::map<std::string, double> s{{"a", 0.9}, {"b", 0.1}};
  EXPECT_EQ(select_from_scores(s, SelectionMode::argmax, 0.1, 0), "a");
  const std::map<std::string, double> tie{{"b", 0.5}, {"a", 0.5}};
  EXPECT_EQ(select_from_scores(tie, SelectionMode::argmax, 0.1, 0), "a");
}

TEST(ScoreAndSelect, ArgmaxInvariantUnderMonotoneTransform) {
  Rng rng(9);
  for (int rep = 0; rep < 100; ++rep) {
    std::map<std::string, double> s, t;
    for (int i = 0; i < 6; ++i) {
      const double v = rng.uniform(0.01, 0.99);
      s["sv" + std::to_string(i)] = v;
      t["sv" + std::to_string(i)] = std::exp(3 * v) + 7;
    }
    EXPECT_EQ(select_from_scores(s, SelectionMode::argmax, 1, 0), select_from_scores(t, SelectionMode::argmax, 1, 0));
  }
}

TEST(ScoreAndSelect, EqualScoresSampleUniformly) {
  const std::map<std::string, double> s{{"a", 0.4}, {"b", 0.4}};
  int a = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) a += select_from_scores(s, SelectionMode::sample, 0.1, derive_seed(17, std::to_string(i))) == "a";
  EXPECT_NEAR(a, n / 2, 3 * std::sqrt(n * 0.25));
}

TEST(ScoreAndSelect, SampleFrequenciesPassChiSquare) {
  const std::map<std::string, double> s{{"a", 0.9}, {"b", 0.7}, {"c", 0.6}, {"d", 0.2}};
  const double T = 0.25;
  std::map<std::string, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[select_from_scores(s, SelectionMode::sample, T, derive_seed(3, std::to_string(i)))]++;
  double z = 0.0;
  for (const auto& [id, v] : s) z += std::exp(v / T);
  double chi2 = 0.0;
  for (const auto& [id, v] : s) {
    const double e = n * std::exp(v / T) / z;
    chi2 += (counts[id] - e) * (counts[id] - e) / e;
  }
  // 3 degrees of freedom: the p = 0.01 critical value is 11.345.
  EXPECT_LT(chi2, 11.345);
}

TEST(ScoreAndSelect, SamplingReproducibleForSeed) {
  const std::map<std::string, double> s{{"a", 0.5}, {"b", 0.45}, {"c", 0.4}};
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    EXPECT_EQ(select_from_scores(s, SelectionMode::sample, 0.1, seed), select_from_scores(s, SelectionMode::sample, 0.1, seed));
}

TEST(ScoreAndSelect, NoEligibleSurroundingVehicle) {
  using namespace fx;
  const Scenario s = make_scenario("alone", highway_map(1), {eastbound("ego", 0, 0, 10)});
  EXPECT_THROW(score_and_select(slice_observation(s, 1.0), ScorerModel{}, SelectionMode::argmax, 0.1, 0), NoOpponentError);
}

TEST(ScoreAndSelect, LeadVehicleGetsTopScoreUnderShippedModel) {
  const auto model = load_model(kData / "models" / "scorer.json");
  const Scenario lv = load_scenario(kData / "fixtures" / "lead_vehicle.json");
  const auto r = score_and_select(slice_observation(lv, 1.0), model, SelectionMode::argmax, 0.1, 0);
  EXPECT_EQ(r.selected, "lead");
  EXPECT_EQ(r.scores.size(), 4u);
}
