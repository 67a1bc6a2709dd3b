#include <gtest/gtest.h>

#include <cmath>

#include "advsim/fixtures.hpp"
#include "advsim/prediction.hpp"
#include "oracles.hpp"

using namespace advsim;
namespace fx = advsim::fixtures;

namespace {

Scenario observed(const Scenario& s, double t = 1.0) { return slice_observation(s, t); }

double total(const HypothesisSet& h) {
  double sum = 0.0;
  for (const auto& y : h.hypotheses) sum += y.probability;
  return sum;
}

std::size_t argmax(const HypothesisSet& h) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < h.hypotheses.size(); ++i)
    if (h.hypotheses[i].probability > h.hypotheses[best].probability) best = i;
  return best;
}

// Opponent driving straight at constant speed, sampled on the ego's future grid.
TrajectoryHypothesis straight_path(double t0, Vec2 p, double heading, double v, int steps, double dt = 0.1) {
  TrajectoryHypothesis y;
  for (int i = 0; i <= steps; ++i) {
    const Vec2 q = p + unit_from_heading(heading) * (v * i * dt);
    y.poses.push_back({t0 + i * dt, q.x, q.y, heading, v});
  }
  return y;
}

double colliding_mass(const HypothesisSet& h) {
  double m = 0.0;
  for (std::size_t i = 0; i < h.hypotheses.size(); ++i)
    if (h.info[i].overlap > 0) m += h.hypotheses[i].probability;
  return m;
}

}  // namespace

TEST(PredictMarginal, SingleHypothesisHasProbabilityOne) {
  PredictorConfig cfg;
  cfg.n_hypotheses = 1;
  for (const auto& s : fx::evaluation_corpus()) {
    const auto h = predict_marginal(observed(s), s.ego_id, cfg);
    ASSERT_EQ(h.hypotheses.size(), 1u);
    EXPECT_EQ(h.hypotheses[0].probability, 1.0);
  }
}

TEST(PredictMarginal, ProbabilitiesSumToOne) {
  PredictorConfig cfg;
  for (int n : {1, 2, 4, 6, 10}) {
    cfg.n_hypotheses = n;
    for (const auto& s : fx::evaluation_corpus()) {
      const Scenario o = observed(s, 2.0);
      for (const auto& tr : o.tracks) {
        const auto h = predict_marginal(o, tr.id, cfg);
        ASSERT_FALSE(h.hypotheses.empty());
        EXPECT_LE(h.hypotheses.size(), static_cast<std::size_t>(n));
        EXPECT_NEAR(total(h), 1.0, 1e-12) << s.id << " " << tr.id;
        for (const auto& y : h.hypotheses) EXPECT_GT(y.probability, 0.0);
      }
    }
  }
}

TEST(PredictMarginal, HypothesesStartAtLatestStateAndCoverHorizon) {
  const Scenario o = observed(fx::merge("m", 1.0, 12, 12), 1.5);
  const auto h = predict_marginal(o, "merger", {});
  const Pose& last = o.track("merger").states.back();
  for (const auto& y : h.hypotheses) {
    ASSERT_EQ(y.poses.size(), 81u);
    EXPECT_EQ(y.poses.front(), last);
    EXPECT_NEAR(y.poses.back().t, last.t + 8.0, 1e-9);
  }
}

TEST(PredictMarginal, StationaryAgentRespectsKinematicBounds) {
  using namespace fx;
  const Scenario s = make_scenario("parked", highway_map(2), {eastbound("ego", 0, 0, 10), eastbound("parked", 1, 30, 0)});
  PredictorConfig cfg;
  cfg.n_hypotheses = 50;
  const auto h = predict_marginal(observed(s), "parked", cfg);
  ASSERT_GE(h.hypotheses.size(), 3u);
  for (const auto& y : h.hypotheses) {
    EXPECT_TRUE(prediction_detail::check_kinematics(y.poses, 0.1, cfg).feasible);
    for (std::size_t i = 1; i < y.poses.size(); ++i) {
      EXPECT_LE(y.poses[i].speed, cfg.max_lon_accel * i * 0.1 + 1e-9);
      EXPECT_LE(std::abs(angle_diff(y.poses[i].heading, y.poses[i - 1].heading)), cfg.max_yaw_rate * 0.1 + 1e-9);
    }
  }
}

TEST(PredictMarginal, ConstantVelocityIsMostLikelyOnStraightRoad) {
  for (double v : {6.0, 10.0, 14.0}) {
    using namespace fx;
    const Scenario s = make_scenario("cruise", highway_map(2), {eastbound("ego", 0, 0, v), eastbound("sv", 1, 20, v)});
    for (const char* id : {"ego", "sv"}) {
      const auto h = predict_marginal(observed(s), id, {});
      const auto k = argmax(h);
      EXPECT_EQ(h.info[k].kind, CandidateKind::constant_velocity) << id << " v=" << v;
      EXPECT_FALSE(h.fallback);
    }
  }
}

TEST(PredictMarginal, OffMapAgentFallsBackToKinematicRollouts) {
  using namespace fx;
  // Northbound on a service road 6 m+ from every lane centerline.
  const Scenario s = make_scenario("off", highway_map(2),
                                   {eastbound("ego", 0, 0, 10), track_along("far", straight({50, -400}, {50, 400}), 100, 10, cruise())});
  PredictorConfig cfg;
  cfg.n_hypotheses = 6;
  const auto h = predict_marginal(observed(s), "far", cfg);
  EXPECT_TRUE(h.fallback);
  ASSERT_EQ(h.hypotheses.size(), 2u);
  for (const auto& c : h.info) EXPECT_NE(c.kind, CandidateKind::lane_goal);
  EXPECT_NEAR(total(h), 1.0, 1e-12);
}

TEST(PredictMarginal, Deterministic) {
  const Scenario o = observed(fx::crossing("c", 1.0, 12, 10), 2.3);
  const TargetDrivenPredictor p({}, 6, 6);
  const auto a = p.marginal(o, "crosser");
  const auto b = p.marginal(o, "crosser");
  EXPECT_EQ(a.hypotheses, b.hypotheses);
}

TEST(PredictMarginal, RigidMotionEquivariant) {
  const double th = 0.6;
  const Vec2 shift{-40, 75};
  auto move = [&](Vec2 p) { return rotate(p, th) + shift; };
  for (const auto& s : fx::evaluation_corpus()) {
    Scenario m = s;
    for (auto& l : m.map.lane_centerlines)
      for (auto& p : l) p = move(p);
    for (auto& l : m.map.drivable_polygons)
      for (auto& p : l) p = move(p);
    for (auto& tr : m.tracks)
      for (auto& p : tr.states) {
        const Vec2 q = move(p.position());
        p.x = q.x, p.y = q.y;
        p.heading = normalize_angle(p.heading + th);
      }
    const auto a = predict_marginal(observed(s), s.ego_id, {});
    const auto b = predict_marginal(observed(m), m.ego_id, {});
    ASSERT_EQ(a.hypotheses.size(), b.hypotheses.size()) << s.id;
    for (std::size_t i = 0; i < a.hypotheses.size(); ++i) {
      EXPECT_NEAR(a.hypotheses[i].probability, b.hypotheses[i].probability, 1e-9) << s.id;
      for (std::size_t k = 0; k < a.hypotheses[i].poses.size(); ++k) {
        const Vec2 want = move(a.hypotheses[i].poses[k].position());
        EXPECT_NEAR(distance(want, b.hypotheses[i].poses[k].position()), 0.0, 1e-6) << s.id;
      }
    }
  }
}

TEST(PredictConditional, ZeroLambdaEqualsMarginal) {
  PredictorConfig cfg;
  cfg.reaction_lambda = 0.0;
  for (const auto& s : fx::evaluation_corpus()) {
    const Scenario o = observed(s, 1.5);
    const std::string ov = o.tracks[1].id;
    const auto y = predict_marginal(o, ov, cfg).hypotheses.front();
    const auto c = predict_conditional(o, o.ego_id, y, {4.8, 2.0}, cfg);
    const auto m = predict_marginal(o, o.ego_id, cfg);
    EXPECT_EQ(c.hypotheses, m.hypotheses) << s.id;
  }
}

TEST(PredictConditional, DistantOpponentLeavesMarginalUnchanged) {
  const Scenario o = observed(fx::lead("l", 15, 12), 1.0);
  PredictorConfig cfg;
  cfg.reaction_lambda = 5.0;
  const auto far = straight_path(1.0, {0, 500}, 0.0, 10, 80);
  const auto c = predict_conditional(o, "ego", far, {4.8, 2.0}, cfg);
  cfg.reaction_lambda = 0.0;
  const auto m = predict_conditional(o, "ego", far, {4.8, 2.0}, cfg);
  ASSERT_EQ(c.hypotheses.size(), m.hypotheses.size());
  for (std::size_t i = 0; i < c.hypotheses.size(); ++i) {
    EXPECT_EQ(c.info[i].overlap, 0);
    EXPECT_NEAR(c.hypotheses[i].probability, m.hypotheses[i].probability, 1e-12);
  }
}

TEST(PredictConditional, HeadOnThreatFavoursAvoidance) {
  using namespace fx;
  const Scenario s = make_scenario("headon", highway_map(2), {eastbound("ego", 0, 0, 10), eastbound("sv", 1, 200, 10)});
  const Scenario o = observed(s);
  const Pose& e = o.ego().states.back();
  // Oncoming vehicle in the ego lane, meeting the constant-velocity ego about 6 s out so a
  // lane change to the free lane can clear it.
  const auto y = straight_path(e.t, {e.x + 120, 0.0}, M_PI, 10, 80);
  PredictorConfig cfg;
  cfg.n_hypotheses = 1000;
  cfg.reaction_lambda = 10.0;
  const auto h = predict_conditional(o, "ego", y, {4.8, 2.0}, cfg);
  ASSERT_GT(h.hypotheses.size(), 5u);
  const auto k = argmax(h);
  int min_overlap = h.info[0].overlap;
  for (const auto& c : h.info) min_overlap = std::min(min_overlap, c.overlap);
  EXPECT_EQ(min_overlap, 0);
  EXPECT_EQ(h.info[k].overlap, 0);
  EXPECT_TRUE(h.info[k].kind == CandidateKind::hard_brake || (h.info[k].kind == CandidateKind::lane_goal && h.info[k].lane == 1));
  // The unconditioned favourite keeps driving straight into the oncoming vehicle.
  const auto m = predict_marginal(o, "ego", cfg);
  EXPECT_EQ(m.info[argmax(m)].kind, CandidateKind::constant_velocity);
  EXPECT_LT(colliding_mass(h), 1e-3);
}

TEST(PredictConditional, CollidingMassNonIncreasingInLambda) {
  const Scenario o = observed(fx::rear_follower("r", 6, 12), 1.0);
  const Pose& f = o.track("follower").states.back();
  // A follower closing at 6 m/s.
  const auto y = straight_path(f.t, f.position(), 0.0, 18, 80);
  double prev = 1.0;
  for (double lam : {0.0, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    PredictorConfig cfg;
    cfg.n_hypotheses = 20;
    cfg.reaction_lambda = lam;
    const double m = colliding_mass(predict_conditional(o, "ego", y, {4.8, 2.0}, cfg));
    EXPECT_LE(m, prev + 1e-12) << lam;
    prev = m;
  }
  EXPECT_GT(prev, 0.0);
}

TEST(PredictConditional, SharedPreparationMatchesPerHypothesisCalls) {
  const Scenario o = observed(fx::merge("m", 0.5, 12, 12), 1.8);
  const TargetDrivenPredictor p({}, 6, 4);
  const auto ys = p.marginal(o, "merger").hypotheses;
  const auto all = p.conditionals(o, "ego", ys, {4.5, 1.9});
  ASSERT_EQ(all.size(), ys.size());
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const auto one = p.conditional(o, "ego", ys[j], {4.5, 1.9});
    EXPECT_EQ(all[j].hypotheses, one.hypotheses);
    EXPECT_LE(one.hypotheses.size(), 4u);
  }
}

TEST(PredictorConfig, InvalidValuesAreConfigErrors) {
  PredictorConfig cfg;
  cfg.n_hypotheses = 0;
  EXPECT_THROW(cfg.check(), ConfigError);
  cfg = {};
  cfg.reaction_lambda = -1;
  EXPECT_THROW(cfg.check(), ConfigError);
  cfg = {};
  cfg.score_temperature = 0;
  EXPECT_THROW(cfg.check(), ConfigError);
  EXPECT_THROW(TargetDrivenPredictor({}, 0, 3), ConfigError);
}

TEST(PredictMarginal, ShortHistoryIsInsufficientData) {
  const Scenario s = fx::lead("l", 10, 12);
  EXPECT_THROW(predict_marginal(slice_observation(s, 0.0), "ego", {}), InsufficientDataError);
}
