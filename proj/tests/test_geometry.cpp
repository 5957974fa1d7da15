#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "oracles.hpp"
#include "scenu/geometry.hpp"

namespace scenu {
namespace {

constexpr double kPi = std::numbers::pi;

std::set<Relation> as_set(const std::vector<Relation>& v) { return {v.begin(), v.end()}; }

TEST(Directional, AxisAligned) {
  EXPECT_EQ(as_set(classify_directional_relation({0, 0, 0}, 0.0, {5, 0, 0})), std::set{Relation::FrontOf});
  EXPECT_EQ(as_set(classify_directional_relation({0, 0, 0}, 0.0, {-5, 0, 0})), std::set{Relation::Behind});
  EXPECT_EQ(as_set(classify_directional_relation({0, 0, 0}, 0.0, {0, 5, 0})), std::set{Relation::LeftOf});
  EXPECT_EQ(as_set(classify_directional_relation({0, 0, 0}, 0.0, {0, -5, 0})), std::set{Relation::RightOf});
  EXPECT_EQ(as_set(classify_directional_relation({0, 0, 0}, kPi / 2, {0, 5, 0})), std::set{Relation::FrontOf});
}

TEST(Directional, TiesGoToFrontAndBehind) {
  EXPECT_EQ(as_set(classify_directional_relation({0, 0, 0}, 0.0, {1, 1, 0})), std::set{Relation::FrontOf});
  EXPECT_EQ(as_set(classify_directional_relation({0, 0, 0}, 0.0, {-1, -1, 0})), std::set{Relation::Behind});
}

TEST(Directional, CoincidentIsTouching) {
  EXPECT_EQ(as_set(classify_directional_relation({1, 2, 0}, 0.3, {1, 2, 5})), std::set{Relation::Touching});
}

TEST(Directional, AgreesWithQuadrantOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-50, 50), ang(-kPi, kPi);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 ref(pos(rng), pos(rng), 0), target(pos(rng), pos(rng), pos(rng));
    const double heading = ang(rng);
    ASSERT_EQ(as_set(classify_directional_relation(ref, heading, target)),
              oracle::quadrant(ref.head<2>(), heading, target.head<2>()))
        << i;
  }
}

TEST(Footprint, Corners) {
  const auto f = make_footprint({1, 1}, kPi / 2, 4, 2);
  const auto c = f.corners();
  double min_x = 1e9, max_y = -1e9;
  for (const auto& p : c) {
    min_x = std::min(min_x, p.x());
    max_y = std::max(max_y, p.y());
  }
  EXPECT_NEAR(min_x, 0.0, 1e-12);
  EXPECT_NEAR(max_y, 3.0, 1e-12);
}

TEST(Distance, AnalyticCases) {
  const Box a = make_box({0, 0, 0.5}, Mat3::Identity(), {1, 1, 1});
  EXPECT_DOUBLE_EQ(surface_distance(a, a), 0.0);
  const Box b = make_box({3, 0, 0.5}, Mat3::Identity(), {1, 1, 1});
  EXPECT_NEAR(surface_distance(a, b), 2.0, 1e-12);
  EXPECT_NEAR(surface_distance(b, a), 2.0, 1e-12);
  const Box above = make_box({0, 0, 3.5}, Mat3::Identity(), {1, 1, 1});
  EXPECT_NEAR(surface_distance(a, above), 2.0, 1e-12);
  const Box diag = make_box({4, 4, 4.5}, Mat3::Identity(), {2, 2, 1});
  EXPECT_NEAR(surface_distance(a, diag), std::sqrt(2.5 * 2.5 * 2 + 9.0), 1e-12);
}

TEST(Distance, AgreesWithSamplingOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-8, 8), ext(0.2, 5), ang(-kPi, kPi), z(0, 3);
  for (int i = 0; i < 10000; ++i) {
    const Box a = make_box({pos(rng), pos(rng), z(rng)}, rotation_from_yaw(ang(rng)), {ext(rng), ext(rng), ext(rng)});
    const Box b = make_box({pos(rng), pos(rng), z(rng)}, rotation_from_yaw(ang(rng)), {ext(rng), ext(rng), ext(rng)});
    const double ours = surface_distance(a, b);
    const double ref = oracle::sampled_distance(a, b, 2500);
    ASSERT_NEAR(ours, ref, 1e-3) << i;
    ASSERT_LE(ours, ref + 1e-9) << i;
    ASSERT_NEAR(ours, surface_distance(b, a), 1e-12);
  }
}

TEST(Volume, Examples) {
  EXPECT_NEAR(occupancy_volume({0.1, 0.1, 0.1}), 0.001, 1e-15);
  EXPECT_DOUBLE_EQ(occupancy_volume({2, 3, 4}), 24.0);
  EXPECT_THROW(occupancy_volume({0, 1, 1}), Error);
}

TEST(Occlusion, NoOccludersIsVisible) {
  const auto r = occlusion_state({0, 0}, make_footprint({10, 0}, 0, 2, 1), {});
  EXPECT_EQ(r.state, Visibility::Visible);
  EXPECT_DOUBLE_EQ(r.blocked_fraction, 0.0);
}

TEST(Occlusion, WallBlocksFully) {
  const auto r = occlusion_state({0, 0}, make_footprint({10, 0}, 0, 1, 1), {make_footprint({5, 0}, 0, 1, 10)});
  EXPECT_EQ(r.state, Visibility::Occluded);
  EXPECT_DOUBLE_EQ(r.blocked_fraction, 1.0);
}

TEST(Occlusion, ViewpointInsideOccluderThrows) {
  EXPECT_THROW(occlusion_state({0, 0}, make_footprint({10, 0}, 0, 1, 1), {make_footprint({0, 0}, 0, 2, 2)}), Error);
}

TEST(Occlusion, AgreesWithDenseSweepOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-20, 20), ext(0.3, 6), ang(-kPi, kPi);
  int compared = 0, partial = 0, close = 0;
  for (int i = 0; i < 10000; ++i) {
    const Vec2 eye(0, 0);
    const Footprint target = make_footprint({pos(rng), pos(rng)}, ang(rng), ext(rng), ext(rng));
    std::vector<Footprint> occ;
    const int n = static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) {
      const Footprint f = make_footprint({pos(rng), pos(rng)}, ang(rng), ext(rng), ext(rng));
      if (!f.contains(eye, 1e-6)) occ.push_back(f);
    }
    const auto ours = occlusion_state(eye, target, occ);
    const auto ref = oracle::dense_sweep(eye, target, occ);
    if (ref.state == Visibility::Visible || ref.state == Visibility::Occluded) {
      ASSERT_EQ(ours.state, ref.state) << i;
      ++compared;
    }
    if (ours.state == Visibility::PartiallyOccluded) {
      ASSERT_EQ(ref.state, Visibility::PartiallyOccluded) << i;
    }
    if (ref.state == Visibility::PartiallyOccluded) {
      ++partial;
      if (std::abs(ours.blocked_fraction - ref.blocked_fraction) <= 0.25) ++close;
    }
  }
  EXPECT_GT(compared, 5000);
  // Five samples cannot track a 721-ray fraction everywhere; most partial cases stay within 0.25.
  ASSERT_GT(partial, 300);
  EXPECT_GE(close, 0.97 * partial) << close << " of " << partial;
}

TEST(Occlusion, AddingAnOccluderNeverReducesFullOcclusion) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(-20, 20), ext(0.3, 6), ang(-kPi, kPi);
  for (int i = 0; i < 2000; ++i) {
    const Footprint target = make_footprint({pos(rng), pos(rng)}, ang(rng), ext(rng), ext(rng));
    std::vector<Footprint> occ;
    for (int k = 0; k < 3; ++k) {
      const Footprint f = make_footprint({pos(rng), pos(rng)}, ang(rng), ext(rng), ext(rng));
      if (!f.contains({0, 0}, 1e-6)) occ.push_back(f);
    }
    const auto before = occlusion_state({0, 0}, target, occ);
    const Footprint extra = make_footprint({pos(rng), pos(rng)}, ang(rng), ext(rng), ext(rng));
    if (extra.contains({0, 0}, 1e-6)) continue;
    occ.push_back(extra);
    const auto after = occlusion_state({0, 0}, target, occ);
    ASSERT_GE(after.blocked_fraction, before.blocked_fraction);
  }
}

TEST(Invariance, RigidMotionKeepsDistanceAndOcclusion) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> pos(-15, 15), ext(0.3, 5), ang(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    const double rot = ang(rng);
    const Vec2 shift(pos(rng), pos(rng));
    auto move = [&](const Footprint& f) {
      Footprint g = f;
      g.center = Eigen::Rotation2Dd(rot) * f.center + shift;
      g.heading = f.heading + rot;
      return g;
    };
    const Footprint a = make_footprint({pos(rng), pos(rng)}, ang(rng), ext(rng), ext(rng));
    const Footprint b = make_footprint({pos(rng), pos(rng)}, ang(rng), ext(rng), ext(rng));
    ASSERT_NEAR(planar_gap(a, b), planar_gap(move(a), move(b)), 1e-9);
    const Vec2 eye(pos(rng), pos(rng));
    if (b.contains(eye, 1e-6)) continue;
    const Vec2 eye2 = Eigen::Rotation2Dd(rot) * eye + shift;
    ASSERT_EQ(occlusion_state(eye, a, {b}).state, occlusion_state(eye2, move(a), {move(b)}).state);
  }
}

SceneObject object(const std::string& id, Vec3 c, double yaw, Extent e) {
  return {id, 0.0, make_box(c, rotation_from_yaw(yaw), e)};
}

bool has(const std::vector<TopologyEntry>& v, const std::string& other, Relation r) {
  return std::find(v.begin(), v.end(), TopologyEntry{other, r}) != v.end();
}

TEST(Topology, ContainmentTouchingAboveAndNear) {
  const auto p = RunConfig::defaults().geometry;
  std::vector<SceneObject> snap{
      object("ego", {0, 0, 0.75}, 0, {4.6, 1.8, 1.5}),
      object("bus", {20, 0, 1.6}, 0, {12, 2.5, 3.2}),
      object("passenger", {20, 0, 1.0}, 0, {0.5, 0.5, 1.7}),
      object("box", {0, 0, 2.0}, 0, {1, 1, 0.5}),
      object("cone", {2.32, 0, 0.25}, 0, {0.02, 0.02, 0.5}),
  };
  const auto topo = derive_topology(snap, "ego", p);
  EXPECT_TRUE(has(topo.at("passenger"), "bus", Relation::ContainedBy));
  EXPECT_TRUE(has(topo.at("bus"), "passenger", Relation::Contains));
  EXPECT_TRUE(has(topo.at("box"), "ego", Relation::Above));
  EXPECT_TRUE(has(topo.at("ego"), "box", Relation::Below));
  EXPECT_TRUE(has(topo.at("cone"), "ego", Relation::Touching));
  EXPECT_TRUE(has(topo.at("ego"), "cone", Relation::Touching));
  EXPECT_TRUE(has(topo.at("cone"), "ego", Relation::Near));
  EXPECT_FALSE(has(topo.at("bus"), "ego", Relation::Near));
  EXPECT_TRUE(has(topo.at("bus"), "ego", Relation::FrontOf));
  EXPECT_TRUE(has(topo.at("ego"), "bus", Relation::Behind));
}

TEST(Topology, MismatchedTimesThrow) {
  std::vector<SceneObject> snap{object("a", {0, 0, 0}, 0, {1, 1, 1}), object("b", {3, 0, 0}, 0, {1, 1, 1})};
  snap[1].t = 1.0;
  EXPECT_THROW(derive_topology(snap, "a", RunConfig::defaults().geometry), Error);
}

TEST(Topology, PairwiseConsistency) {
  const auto p = RunConfig::defaults().geometry;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(-12, 12), ext(0.3, 5), ang(-kPi, kPi), z(0, 3);
  auto mirror = [](Relation r) {
    switch (r) {
      case Relation::LeftOf: return Relation::RightOf;
      case Relation::RightOf: return Relation::LeftOf;
      case Relation::FrontOf: return Relation::Behind;
      case Relation::Behind: return Relation::FrontOf;
      case Relation::Above: return Relation::Below;
      case Relation::Below: return Relation::Above;
      case Relation::Contains: return Relation::ContainedBy;
      case Relation::ContainedBy: return Relation::Contains;
      default: return r;
    }
  };
  for (int i = 0; i < 1000; ++i) {
    std::vector<SceneObject> snap;
    for (int k = 0; k < 4; ++k) {
      snap.push_back(object("o" + std::to_string(k), {pos(rng), pos(rng), z(rng)}, ang(rng), {ext(rng), ext(rng), ext(rng)}));
    }
    const auto topo = derive_topology(snap, "o0", p);
    for (const auto& [id, entries] : topo) {
      for (const auto& e : entries) {
        ASSERT_TRUE(has(topo.at(e.other), id, mirror(e.relation.value())))
            << id << " " << e.relation.token() << " " << e.other;
      }
    }
  }
}

TEST(Interpolate, LinearPositionSphericalOrientation) {
  std::vector<StateSample> traj(2);
  traj[0].t = 0;
  traj[0].position = Vec3(0, 0, 0);
  traj[0].orientation = rotation_from_yaw(0);
  traj[1].t = 2;
  traj[1].position = Vec3(2, 4, 0);
  traj[1].orientation = rotation_from_yaw(1.0);
  const auto s = interpolate(traj, 1.0);
  EXPECT_NEAR(s.position.x(), 1.0, 1e-12);
  EXPECT_NEAR(s.position.y(), 2.0, 1e-12);
  EXPECT_NEAR(yaw_of(s.orientation), 0.5, 1e-12);
  EXPECT_THROW(interpolate(traj, 3.0), Error);
}

}  // namespace
}  // namespace scenu
