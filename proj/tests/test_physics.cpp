#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "generators.hpp"
#include "oracles.hpp"
#include "scenu/json_io.hpp"
#include "scenu/physics.hpp"

namespace scenu {
namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST(Rss, ClosedFormExamples) {
  EXPECT_DOUBLE_EQ(rss_longitudinal_safe_distance(0, 0, 1, 2, 4, 8), 0.0 + 0.5 * 2 * 1 + 4.0 / 8.0);
  EXPECT_NEAR(rss_longitudinal_safe_distance(10, 0, 1, 2, 4, 8), 29.0, 1e-12);
  EXPECT_DOUBLE_EQ(rss_longitudinal_safe_distance(0, 30, 1, 2, 4, 8), 0.0);
}

TEST(Rss, MonotoneInRearSpeed) {
  for (double vf : {0.0, 5.0, 15.0, 30.0}) {
    double prev = -1.0;
    for (int i = 0; i < 100; ++i) {
      const double d = rss_longitudinal_safe_distance(0.4 * i, vf, 1, 2, 4, 8);
      ASSERT_GE(d, prev) << vf << " " << i;
      prev = d;
    }
  }
}

MotionModel of(MotionKind k) {
  MotionModel m;
  m.kind = k;
  return m;
}

KinematicState moving(Vec3 p, Vec3 v, double yaw = 0.0) {
  KinematicState s;
  s.position = p;
  s.velocity = v;
  s.orientation = rotation_from_yaw(yaw);
  s.speed = v.norm();
  return s;
}

TEST(Predict, ConstantVelocityExample) {
  const auto p = predict_from(moving({0, 0, 0}, {1, 0, 0}), of(MotionKind::ConstantVelocity), 2.0, 0.5);
  ASSERT_EQ(p.samples.size(), 4u);
  EXPECT_DOUBLE_EQ(p.samples[0].t, 0.5);
  EXPECT_DOUBLE_EQ(p.samples.back().t, 2.0);
  EXPECT_NEAR((p.samples.back().position - Vec3(2, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_FALSE(p.fallback);
}

TEST(Predict, HorizonNotMultipleOfStepEndsAtHorizon) {
  const auto p = predict_from(moving({0, 0, 0}, {1, 0, 0}), of(MotionKind::ConstantVelocity), 1.0, 0.3);
  ASSERT_EQ(p.samples.size(), 4u);
  EXPECT_DOUBLE_EQ(p.samples.back().t, 1.0);
}

TEST(Predict, StaticHoldsPose) {
  const auto p = predict_from(moving({3, 4, 0}, {2, 0, 0}, 0.7), of(MotionKind::Static), 4.0, 0.1);
  for (const auto& s : p.samples) {
    EXPECT_EQ(s.position, Vec3(3, 4, 0));
    EXPECT_DOUBLE_EQ(s.speed, 0.0);
  }
}

TEST(Predict, InvalidHorizonOrStepThrows) {
  const auto s = moving({0, 0, 0}, {1, 0, 0});
  EXPECT_THROW(predict_from(s, of(MotionKind::ConstantVelocity), 0.0, 0.1), Error);
  EXPECT_THROW(predict_from(s, of(MotionKind::ConstantVelocity), 1.0, -0.1), Error);
}

TEST(Predict, BicycleMatchesFineEulerOracle) {
  KinematicState s = moving({1, -2, 0}, {2, 0, 0});
  MotionModel m{MotionKind::KinematicBicycle, 2.7, 0.1};
  const auto p = predict_from(s, m, 5.0, 0.1);
  const auto ref = oracle::euler_bicycle(1, -2, 0, 2, 0.1, 2.7, 5.0, 1e-4);
  EXPECT_NEAR(p.samples.back().position.x(), ref.x, 1e-4);
  EXPECT_NEAR(p.samples.back().position.y(), ref.y, 1e-4);
  EXPECT_NEAR(yaw_of(p.samples.back().orientation), ref.theta, 1e-4);
}

TEST(Predict, BicycleWithoutSteeringFallsBack) {
  const auto p = predict_from(moving({0, 0, 0}, {1, 0, 0}), of(MotionKind::KinematicBicycle), 1.0, 0.5);
  EXPECT_TRUE(p.fallback);
  EXPECT_NEAR(p.samples.back().position.x(), 1.0, 1e-12);
}

TEST(Predict, SemigroupProperty) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-10, 10), h(0.1, 5);
  for (int i = 0; i < 1000; ++i) {
    KinematicState s = moving({u(rng), u(rng), 0}, {u(rng), u(rng), 0});
    s.acceleration = Vec3(u(rng) / 5, u(rng) / 5, 0);
    const double h1 = h(rng), h2 = h(rng);
    for (auto kind : {MotionKind::Static, MotionKind::ConstantVelocity, MotionKind::ConstantAcceleration}) {
      const auto whole = predict_from(s, of(kind), h1 + h2, 0.1);
      const auto first = predict_from(s, of(kind), h1, 0.1);
      const auto second = predict_from(first.end, of(kind), h2, 0.1);
      const double tol = kind == MotionKind::ConstantAcceleration ? 1e-6 : 1e-9;
      ASSERT_NEAR((whole.end.position - second.end.position).norm(), 0.0, tol) << i;
      ASSERT_NEAR(whole.end.t, second.end.t, 1e-9);
    }
  }
}

TEST(AssignModel, Rules) {
  const auto p = RunConfig::defaults().physics;
  EXPECT_EQ(assign_model(ElementClass::Vehicle, Term<MotionState>(MotionState::Parked), 0.2, p).kind, MotionKind::Static);
  EXPECT_EQ(assign_model(ElementClass::Pedestrian, Term<MotionState>(MotionState::Walking), 0.5, p).kind,
            MotionKind::ConstantVelocity);
  const auto bus = assign_model(ElementClass::PublicTransport, Term<MotionState>(MotionState::Moving), 0.2, p);
  EXPECT_EQ(bus.kind, MotionKind::KinematicBicycle);
  EXPECT_DOUBLE_EQ(bus.wheelbase, 6.0);
  EXPECT_EQ(assign_model(ElementClass::Vehicle, Term<MotionState>(MotionState::Moving), std::nullopt, p).kind,
            MotionKind::ConstantVelocity);
  EXPECT_EQ(assign_model(ElementClass::StaticObject, std::nullopt, std::nullopt, p).kind, MotionKind::Static);
}

Element straight(const std::string& id, double x0, double y0, double yaw, double speed, double t0 = -2.0) {
  Element e;
  e.id = id;
  for (int k = 0; k <= 4; ++k) {
    StateSample s;
    s.t = t0 + k * 0.5;
    const double d = speed * (s.t - t0);
    s.position = Vec3(x0 + d * std::cos(yaw), y0 + d * std::sin(yaw), 0.5);
    s.orientation = rotation_from_yaw(yaw);
    s.speed = speed;
    e.trajectory.push_back(s);
  }
  return e;
}

void annotate(ScenarioDescription& d, const std::string& id, ElementClass cls, MotionState st, Extent ext) {
  SemanticAnnotation s;
  s.element_id = id;
  s.class_ = cls;
  s.state = st;
  d.semantic.push_back(s);
  SpatialAnnotation sp;
  sp.element_id = id;
  sp.occupancy = ext;
  d.spatial.push_back(sp);
}

TEST(Anticipate, StaticSceneHasNoEvents) {
  ScenarioDescription d;
  d.window = {-2, 0};
  d.ego_id = "a";
  d.elements = {straight("a", 0, 0, 0, 0), straight("b", 10, 3, 1, 0), straight("c", -5, -5, 2, 0)};
  annotate(d, "a", ElementClass::Vehicle, MotionState::Parked, {4, 2, 1});
  annotate(d, "b", ElementClass::StaticObject, MotionState::Stopped, {1, 1, 1});
  annotate(d, "c", ElementClass::Vehicle, MotionState::Parked, {4, 2, 1});
  const auto a = anticipate(d, RunConfig::defaults());
  EXPECT_TRUE(a.events.empty());
  EXPECT_TRUE(a.relations.empty());
  ASSERT_EQ(a.tracks.size(), 3u);
  EXPECT_GT(a.tracks[0].samples.front().t, 0.0);
}

std::optional<double> touching_time(double dt) {
  ScenarioDescription d;
  d.window = {-2, 0};
  d.ego_id = "a";
  d.elements = {straight("a", -2, 0, 0, 1), straight("b", 12, 0, std::numbers::pi, 1)};
  annotate(d, "a", ElementClass::Vehicle, MotionState::Moving, {1, 1, 1});
  annotate(d, "b", ElementClass::Vehicle, MotionState::Moving, {1, 1, 1});
  RunConfig cfg = RunConfig::defaults();
  cfg.anticipation.horizon = 6.0;
  cfg.anticipation.dt = dt;
  for (const auto& e : anticipate(d, cfg).events) {
    if (e.tag == EventTag::RelationAdded && e.detail == "touching") return e.t;
  }
  return std::nullopt;
}

TEST(Anticipate, ConvergingElementsTouchAtAnalyticTime) {
  // Centers 10 m apart closing at 2 m/s; touching once the gap reaches 0.05 m.
  const double analytic = (10.0 - 1.0 - 0.05) / 2.0;
  double prev_err = 1e9;
  for (double dt : {0.2, 0.1, 0.01}) {
    const auto t = touching_time(dt);
    ASSERT_TRUE(t.has_value()) << dt;
    EXPECT_LE(std::abs(*t - analytic), dt + 1e-9) << dt;
    EXPECT_GE(*t, analytic - 1e-9) << dt;
    EXPECT_LE(std::abs(*t - analytic), prev_err + 1e-9);
    prev_err = std::abs(*t - analytic);
  }
}

int occlusion_events(const std::vector<Term<Affordance>>& blocker_affordances) {
  ScenarioDescription d;
  d.window = {-2, 0};
  d.ego_id = "a";
  d.elements = {straight("a", 0, 0, 0, 0), straight("b", 10, -14, std::numbers::pi / 2, 4),
                straight("t", 20, 0, 0, 0)};
  annotate(d, "a", ElementClass::Vehicle, MotionState::Parked, {4, 2, 1});
  annotate(d, "b", ElementClass::Vehicle, MotionState::Moving, {4, 2, 1});
  annotate(d, "t", ElementClass::StaticObject, MotionState::Stopped, {1, 1, 1});
  d.semantic[1].affordances = blocker_affordances;
  int n = 0;
  for (const auto& e : anticipate(d, RunConfig::defaults()).events) {
    if (e.elements == std::vector<std::string>{"t"} && (e.tag == EventTag::Occluded || e.tag == EventTag::Reappears)) ++n;
  }
  return n;
}

TEST(Anticipate, OnlyOccludingElementsBlockTheView) {
  EXPECT_EQ(occlusion_events({}), 2);
  EXPECT_EQ(occlusion_events({Affordance::CanOcclude, Affordance::CanSignal}), 2);
  EXPECT_EQ(occlusion_events({Affordance::CanSignal}), 0);
}

TEST(Anticipate, NonPositiveHorizonThrows) {
  ScenarioDescription d;
  RunConfig cfg = RunConfig::defaults();
  cfg.anticipation.horizon = 0.0;
  EXPECT_THROW(anticipate(d, cfg), Error);
  cfg.anticipation.horizon = -1.0;
  EXPECT_THROW(anticipate(d, cfg), Error);
}

TEST(Constraints, AccelerationAboveVehicleBound) {
  ScenarioDescription d;
  d.window = {-2, 0};
  d.elements.push_back(straight("car", 0, 0, 0, 5));
  annotate(d, "car", ElementClass::Vehicle, MotionState::Moving, {4.6, 1.8, 1.5});
  TemporalAnnotation t;
  t.element_id = "car";
  t.interval = d.window;
  t.acceleration = {{-2, Vec3(1, 0, 0)}, {-1, Vec3(12, 0, 0)}, {0, Vec3(0, 3, 0)}};
  d.temporal.push_back(t);
  PhysicalAnnotation p;
  p.element_id = "car";
  p.interval = d.window;
  p.model = PhysicalModel::ConstantVelocity;
  p.constraints.push_back({"max_accel:car", ConstraintKind::MaxAccel, {}});
  p.constraints.push_back({"max_speed:car", ConstraintKind::MaxSpeed, {}});
  d.physical.push_back(p);
  const auto v = check_constraints(d, RunConfig::defaults());
  ASSERT_EQ(v.size(), 2u);
  EXPECT_FALSE(v[0].satisfied);
  EXPECT_NEAR(v[0].margin, -4.0, 1e-12);
  EXPECT_DOUBLE_EQ(v[0].t_worst, -1.0);
  EXPECT_TRUE(v[1].inconclusive);
}

TEST(Constraints, ScenarioTwoRulesAreSatisfied) {
  const auto d = description_from_json(
      nlohmann::json::parse(slurp(std::string(SCENU_SOURCE_DIR) + "/data/fixtures/v1/scenario2/gt.json")));
  const auto v = check_constraints(d, RunConfig::defaults());
  ASSERT_FALSE(v.empty());
  bool saw_rule = false;
  for (const auto& c : v) {
    EXPECT_TRUE(c.satisfied && !c.inconclusive) << c.constraint_id << " margin " << c.margin;
    saw_rule = saw_rule || c.kind == ConstraintKind::TrafficRule;
  }
  EXPECT_TRUE(saw_rule);
}

TEST(Constraints, OneVerdictPerConstraint) {
  testgen::Gen g(33);
  const RunConfig cfg = RunConfig::defaults();
  for (int i = 0; i < 300; ++i) {
    const auto d = g.description();
    std::size_t n = 0;
    for (const auto& p : d.physical) n += p.constraints.size();
    const auto v = check_constraints(d, cfg);
    ASSERT_EQ(v.size(), n) << i;
    for (const auto& c : v) {
      if (!c.inconclusive) {
        ASSERT_EQ(c.satisfied, c.margin >= 0.0);
      }
    }
  }
}

}  // namespace
}  // namespace scenu
