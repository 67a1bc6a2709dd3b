#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "advsim/engine.hpp"
#include "advsim/fixtures.hpp"
#include "advsim/pipeline.hpp"

using namespace advsim;
namespace fx = advsim::fixtures;

namespace {

const std::filesystem::path kData = ADVSIM_DATA_DIR;

const ScorerModel& shipped_model() {
  static const ScorerModel m = load_model(kData / "models" / "scorer.json");
  return m;
}

std::vector<Pose> parked_at(double x, double y, int steps = 10) {
  std::vector<Pose> out;
  for (int i = 0; i <= steps; ++i) out.push_back({1.0 + i * 0.1, x, y, 0.0, 0.0});
  return out;
}

// Hand-built distributions: opponent hypothesis j parks at x = 10 j, ego hypotheses either
// sit on top of it (colliding) or 100 m away.
class FixedPredictor : public TrajectoryPredictor {
 public:
  FixedPredictor(std::vector<double> p, std::vector<std::vector<double>> q, std::vector<std::vector<bool>> hit)
      : p_(std::move(p)), q_(std::move(q)), hit_(std::move(hit)) {}

  HypothesisSet marginal(const Scenario&, const std::string& agent) const override {
    HypothesisSet h;
    h.agent_id = agent;
    for (std::size_t j = 0; j < p_.size(); ++j) {
      h.hypotheses.push_back({parked_at(10.0 * j, 0.0), p_[j]});
      h.info.emplace_back();
    }
    return h;
  }

  HypothesisSet conditional(const Scenario&, const std::string& ego, const TrajectoryHypothesis& y,
                            BoxDims) const override {
    const auto j = static_cast<std::size_t>(std::lround(y.poses.front().x / 10.0));
    HypothesisSet h;
    h.agent_id = ego;
    for (std::size_t k = 0; k < q_[j].size(); ++k) {
      h.hypotheses.push_back({parked_at(10.0 * j, hit_[j][k] ? 0.0 : 100.0), q_[j][k]});
      h.info.emplace_back();
    }
    return h;
  }

 private:
  std::vector<double> p_;
  std::vector<std::vector<double>> q_;
  std::vector<std::vector<bool>> hit_;
};

Scenario two_cars() {
  using namespace fx;
  return slice_observation(make_scenario("two", highway_map(2), {eastbound("ego", 0, 0, 10), eastbound("ov", 1, 0, 10)}), 1.0);
}

SimConfig quiet(SimMode m) {
  SimConfig c = SimConfig::for_mode(m);
  c.planner.kind = PlannerKind::replay;
  c.opponent = "far";
  return c;
}

}  // namespace

TEST(SelectAdversarial, RiskArgmaxOfTwoHypotheses) {
  // risk_0 = 0.6 * 0.5 = 0.30, risk_1 = 0.4 * 0.9 = 0.36.
  const FixedPredictor pred({0.6, 0.4}, {{0.5, 0.5}, {0.9, 0.1}}, {{true, false}, {true, false}});
  const auto c = select_adversarial_trajectory(two_cars(), "ov", "ego", pred);
  EXPECT_TRUE(c.collision_found);
  EXPECT_EQ(c.index, 1);
  ASSERT_EQ(c.risks.size(), 2u);
  EXPECT_DOUBLE_EQ(c.risks[0], 0.30);
  EXPECT_DOUBLE_EQ(c.risks[1], 0.4 * 0.9);
  EXPECT_EQ(c.trajectory, pred.marginal(two_cars(), "ov").hypotheses[1]);
  EXPECT_EQ(c.coll, (std::vector<std::vector<char>>{{1, 0}, {1, 0}}));
}

TEST(SelectAdversarial, TiesGoToLowestIndex) {
  const FixedPredictor pred({0.5, 0.5}, {{1.0}, {1.0}}, {{true}, {true}});
  EXPECT_EQ(select_adversarial_trajectory(two_cars(), "ov", "ego", pred).index, 0);
}

TEST(SelectAdversarial, NoCollisionFallsBackToMostLikelyPair) {
  // Pairs: 0.7 * {0.4, 0.3, 0.3} = {0.28, 0.21, 0.21} against 0.3 * 1.0.
  const FixedPredictor pred({0.7, 0.3}, {{0.4, 0.3, 0.3}, {1.0}}, {{false, false, false}, {false}});
  const auto c = select_adversarial_trajectory(two_cars(), "ov", "ego", pred);
  EXPECT_FALSE(c.collision_found);
  EXPECT_EQ(c.index, 1);
  EXPECT_EQ(c.fallback_k, 0);
  EXPECT_EQ(c.risks, (std::vector<double>{0.0, 0.0}));
}

TEST(RunEpisode, GeneratesOnePlanAndS1ReplansEverySecond) {
  const Scenario s = fx::rear_follower("r", 8, 12);
  const auto g = run_episode(s, quiet(SimMode::G), {}, 0);
  EXPECT_EQ(g.replans.size(), 1u);
  EXPECT_EQ(g.end_reason, "horizon");
  const auto s1 = run_episode(s, quiet(SimMode::S1), {}, 0);
  ASSERT_EQ(s1.replans.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(s1.replans[i].t, 1.0 + i, 1e-9);
  EXPECT_EQ(run_episode(s, quiet(SimMode::S2), {}, 0).replans.size(), 4u);
  EXPECT_EQ(run_episode(s, quiet(SimMode::S4), {}, 0).replans.size(), 2u);
  EXPECT_EQ(s1.ego_track.size(), 91u);
  EXPECT_DOUBLE_EQ(s1.start_time, 1.0);
}

TEST(RunEpisode, CustomUpdateCycle) {
  SimConfig c = quiet(SimMode::custom);
  c.update_cycle = 0.5;
  EXPECT_EQ(run_episode(fx::lead("l", 20, 12), c, {}, 0).replans.size(), 16u);
  c.update_cycle = 3.0;
  EXPECT_EQ(run_episode(fx::lead("l", 20, 12), c, {}, 0).replans.size(), 3u);
}

TEST(RunEpisode, ShorterHorizonOverride) {
  SimConfig c = quiet(SimMode::S1);
  c.future_horizon = 3.0;
  const auto r = run_episode(fx::lead("l", 20, 12), c, {}, 0);
  EXPECT_EQ(r.replans.size(), 3u);
  EXPECT_NEAR(r.ego_track.back().t, 4.0, 1e-9);
}

TEST(RunEpisode, StopsAtCollisionAndBoxesTouchThere) {
  int collisions = 0;
  const SimConfig cfg;
  for (const auto& s : fx::evaluation_corpus()) {
    const auto r = run_episode(s, cfg, shipped_model());
    ASSERT_TRUE(r.valid) << r.error;
    if (!r.collision.report.occurred) {
      EXPECT_NE(r.end_reason, "collision");
      continue;
    }
    ++collisions;
    EXPECT_EQ(r.end_reason, "collision");
    const double tc = *r.collision.report.time;
    EXPECT_NEAR(r.ego_track.back().t, tc, 1e-9) << s.id;
    for (const auto& p : r.opponent_track) EXPECT_LE(p.t, tc + 1e-9) << s.id;
    const AgentTrack& other = s.track(r.collision.agent_id);
    const auto o = r.collision.with_opponent ? std::optional<Pose>(r.opponent_track.back())
                                             : pose_at(other.states, tc, s.dt);
    ASSERT_TRUE(o);
    EXPECT_TRUE(boxes_intersect(box_at(r.ego_track.back(), {s.ego().length, s.ego().width}),
                                box_at(*o, {other.length, other.width})))
        << s.id;
    EXPECT_GE(*r.collision.report.relative_speed, 0.0);
  }
  EXPECT_GT(collisions, 0);
}

TEST(RunEpisode, OpponentTrackIsContinuousOnTheGrid) {
  const SimConfig cfg;
  for (const auto& s : fx::evaluation_corpus()) {
    const auto r = run_episode(s, cfg, shipped_model());
    const auto& tr = r.opponent_track;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      EXPECT_EQ(grid_index(tr[i].t, s.dt) - grid_index(tr[i - 1].t, s.dt), 1) << s.id;
      // No jump larger than 30 m/s can cover in one step.
      EXPECT_LE(distance(tr[i].position(), tr[i - 1].position()), 3.0) << s.id;
    }
    const auto& log = s.track(r.opponent_id).states;
    for (std::size_t i = 0; i < tr.size() && tr[i].t <= r.start_time + 1e-9; ++i) EXPECT_EQ(tr[i], log[i]);
  }
}

TEST(RunEpisode, NullAdversaryReproducesTheLog) {
  SimConfig cfg;
  cfg.null_adversary = true;
  cfg.planner.kind = PlannerKind::replay;
  std::vector<Scenario> corpus = fx::evaluation_corpus();
  Scenario rammer = fx::make_scenario("ram", fx::highway_map(2),
                                      {fx::eastbound("ego", 0, 0, 10), fx::eastbound("follower", 0, -12, 16)});
  corpus.push_back(rammer);
  for (const auto& s : corpus) {
    const auto r = run_episode(s, cfg, shipped_model());
    EXPECT_TRUE(r.replans.empty());
    const auto logged = logged_collision(s);
    EXPECT_EQ(r.collision.report.occurred, logged.report.occurred) << s.id;
    if (logged.report.occurred) {
      EXPECT_DOUBLE_EQ(*r.collision.report.time, *logged.report.time);
      EXPECT_EQ(r.collision.agent_id, logged.agent_id);
    }
    for (std::size_t i = 0; i < r.ego_track.size(); ++i) EXPECT_EQ(r.ego_track[i], s.ego().states[i]);
    const auto& log = s.track(r.opponent_id).states;
    for (std::size_t i = 0; i < r.opponent_track.size(); ++i) EXPECT_EQ(r.opponent_track[i], log[i]);
  }
  EXPECT_TRUE(logged_collision(rammer).report.occurred);
}

TEST(RunEpisode, ErrorsAndInvalidEpisodes) {
  using namespace fx;
  const Scenario alone = make_scenario("alone", highway_map(1), {eastbound("ego", 0, 0, 10)});
  EXPECT_THROW(run_episode(alone, {}, shipped_model(), 0), NoOpponentError);
  SimConfig forced;
  forced.opponent = "ego";
  EXPECT_THROW(run_episode(fx::lead("l", 10, 12), forced, {}, 0), NoOpponentError);
  SimConfig bad = SimConfig::for_mode(SimMode::G);
  bad.update_cycle = 1.0;
  EXPECT_THROW(run_episode(fx::lead("l", 10, 12), bad, {}, 0), ConfigError);
}

TEST(RunEpisode, SeedDerivationMatchesOverload) {
  const Scenario s = fx::adjacent("a", 3, 13, 13);
  SimConfig cfg;
  cfg.seed = 11;
  EXPECT_TRUE(run_episode(s, cfg, shipped_model()).same_outcome(run_episode(s, cfg, shipped_model(), derive_seed(11, "a"))));
}

TEST(RunBatch, SingleScenarioMatchesEpisode) {
  const Scenario s = fx::merge("m", -1.0, 12, 13);
  const SimConfig cfg;
  const auto batch = run_batch({s}, cfg, shipped_model());
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_TRUE(batch[0].same_outcome(run_episode(s, cfg, shipped_model())));
}

TEST(RunBatch, OrderFollowsCorpusAndResultsAreOrderIndependent) {
  auto corpus = fx::evaluation_corpus();
  const SimConfig cfg;
  const auto fwd = run_batch(corpus, cfg, shipped_model());
  std::reverse(corpus.begin(), corpus.end());
  const auto rev = run_batch(corpus, cfg, shipped_model());
  ASSERT_EQ(fwd.size(), rev.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    EXPECT_EQ(rev[i].scenario_id, corpus[i].id);
    EXPECT_TRUE(fwd[i].same_outcome(rev[rev.size() - 1 - i]));
  }
}

TEST(RunBatch, ParallelMatchesSerial) {
  const auto corpus = fx::evaluation_corpus();
  SimConfig cfg = SimConfig::for_mode(SimMode::S2);
  cfg.seed = 5;
  const auto serial = run_batch(corpus, cfg, shipped_model(), 1);
  const auto parallel = run_batch(corpus, cfg, shipped_model(), 8);
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_TRUE(serial[i].same_outcome(parallel[i])) << corpus[i].id;
}

TEST(RunBatch, FailuresAreRecordedNotFatal) {
  using namespace fx;
  std::vector<Scenario> corpus{make_scenario("alone", highway_map(1), {eastbound("ego", 0, 0, 10)}), fx::lead("l", 12, 12)};
  const auto r = run_batch(corpus, {}, shipped_model(), 2);
  EXPECT_FALSE(r[0].valid);
  EXPECT_EQ(r[0].end_reason, "error");
  EXPECT_TRUE(r[1].valid);
  EXPECT_THROW(run_batch({}, {}, shipped_model()), InsufficientDataError);
}
