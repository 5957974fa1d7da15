#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "scenu/config.hpp"
#include "scenu/temporal.hpp"

namespace scenu {
namespace {

const TemporalParams kParams = RunConfig::defaults().temporal;

// Samples a speed profile along +x at `rate` Hz over [t0, t1].
std::vector<StateSample> track(double t0, double t1, double rate, const std::function<double(double)>& speed) {
  std::vector<StateSample> out;
  const int n = static_cast<int>(std::lround((t1 - t0) * rate));
  double x = 0.0;
  for (int k = 0; k <= n; ++k) {
    StateSample s;
    s.t = t0 + k / rate;
    s.speed = speed(s.t);
    if (k > 0) x += s.speed / rate;
    s.position = Vec3(x, 0, 0);
    out.push_back(s);
  }
  return out;
}

TEST(ClassifyState, ParkedStoppedMovingWalking) {
  const auto still = track(0, 10, 2, [](double) { return 0.0; });
  EXPECT_EQ(classify_state(still, ElementClass::Vehicle, 6.0, kParams), MotionState::Parked);
  EXPECT_EQ(classify_state(still, ElementClass::Vehicle, 4.0, kParams), MotionState::Stopped);
  EXPECT_EQ(classify_state(still, ElementClass::Pedestrian, 8.0, kParams), MotionState::Stopped);
  const auto walking = track(0, 4, 2, [](double) { return 1.2; });
  EXPECT_EQ(classify_state(walking, ElementClass::Pedestrian, 2.0, kParams), MotionState::Walking);
  EXPECT_EQ(classify_state(walking, ElementClass::Vehicle, 2.0, kParams), MotionState::Moving);
  EXPECT_THROW(classify_state(walking, ElementClass::Vehicle, 5.0, kParams), Error);
}

TEST(ClassifyState, YieldingNeedsPriorityHolderMoving) {
  const auto car = track(0, 4, 2, [](double) { return 0.0; });
  const auto cyclist = track(0, 4, 2, [](double t) { return t < 3 ? 1.0 : 0.0; });
  StateEnv env;
  env.element_id = "car";
  env.rules.push_back({"r1", "cyclist", {"car"}, 1.0});
  env.trajectories["cyclist"] = &cyclist;
  EXPECT_EQ(classify_state(car, ElementClass::Vehicle, 2.0, kParams, &env), MotionState::Yielding);
  EXPECT_EQ(classify_state(car, ElementClass::Vehicle, 0.5, kParams, &env), MotionState::Stopped);
  EXPECT_EQ(classify_state(car, ElementClass::Vehicle, 3.5, kParams, &env), MotionState::Stopped);
  env.element_id = "bystander";
  EXPECT_EQ(classify_state(car, ElementClass::Vehicle, 2.0, kParams, &env), MotionState::Stopped);
}

TEST(StateSequence, AlwaysMovingIsOneInterval) {
  const auto t = track(-4, 0, 5, [](double) { return 3.0; });
  const auto seq = extract_state_sequence(t, ElementClass::Vehicle, kParams);
  ASSERT_EQ(seq.size(), 1u);
  EXPECT_EQ(seq[0].state, MotionState::Moving);
  EXPECT_DOUBLE_EQ(seq[0].interval.start, -4.0);
  EXPECT_DOUBLE_EQ(seq[0].interval.end, 0.0);
  EXPECT_THROW(extract_state_sequence({t[0]}, ElementClass::Vehicle, kParams), Error);
}

std::function<double(double)> square_wave(double on, double off) {
  return [=](double t) { return std::fmod(t, on + off) < on - 1e-9 ? 2.0 : 0.0; };
}

TEST(StateSequence, StopAndGoSquareWave) {
  const auto t = track(0, 29.5, 2, square_wave(5, 5));
  const auto seq = extract_state_sequence(t, ElementClass::Cyclist, kParams);
  ASSERT_EQ(seq.size(), 6u);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    EXPECT_EQ(seq[i].state, i % 2 == 0 ? MotionState::Moving : MotionState::Stopped) << i;
    if (i > 0 && i + 1 < seq.size()) {
      EXPECT_NEAR(seq[i].interval.length(), 5.0, 1e-9) << i;
    }
  }
  EXPECT_DOUBLE_EQ(seq.front().interval.start, 0.0);
  EXPECT_DOUBLE_EQ(seq.back().interval.end, 29.5);
}

TEST(StateSequence, PartitionsSpanOnRandomProfiles) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> flip(0, 1);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> levels(12);
    for (auto& l : levels) l = flip(rng) ? 1.5 : 0.0;
    const auto t = track(-6, 0, 2, [&](double s) { return levels[static_cast<std::size_t>(std::min(11.0, (s + 6) * 2))]; });
    const auto seq = extract_state_sequence(t, ElementClass::Vehicle, kParams);
    ASSERT_DOUBLE_EQ(seq.front().interval.start, -6.0);
    ASSERT_DOUBLE_EQ(seq.back().interval.end, 0.0);
    for (std::size_t k = 0; k < seq.size(); ++k) {
      ASSERT_LT(seq[k].interval.start, seq[k].interval.end);
      if (k > 0) {
        ASSERT_DOUBLE_EQ(seq[k].interval.start, seq[k - 1].interval.end);
        ASSERT_NE(seq[k].state, seq[k - 1].state);
      }
    }
  }
}

TEST(ClassifyState, StableUnderResampling) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> v(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> levels(20);
    for (auto& l : levels) l = v(rng) < 0.8 ? 0.0 : v(rng);
    auto profile = [&](double s) { return levels[static_cast<std::size_t>(std::min(19.0, std::floor(s)))]; };
    const auto coarse = track(0, 19, 2, profile);
    const auto fine = track(0, 19, 8, profile);
    for (const auto& s : coarse) {
      ASSERT_EQ(classify_state(coarse, ElementClass::Vehicle, s.t, kParams),
                classify_state(fine, ElementClass::Vehicle, s.t, kParams))
          << i << " t=" << s.t;
    }
  }
}

TEST(Ordering, Examples) {
  EXPECT_EQ(order_relation({0, 1}, {2, 3}, 0.1), Ordering::Before);
  EXPECT_EQ(order_relation({2, 3}, {0, 1}, 0.1), Ordering::After);
  EXPECT_EQ(order_relation({0, 2}, {1, 3}, 0.1), Ordering::Simultaneous);
  EXPECT_EQ(order_relation({0, 1}, {1.05, 2}, 0.1), Ordering::Simultaneous);
}

TEST(Ordering, TrichotomyAndDuality) {
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> u(-10, 10), len(0.01, 5);
  for (int i = 0; i < 10000; ++i) {
    const double a0 = u(rng), b0 = u(rng);
    const Interval a{a0, a0 + len(rng)}, b{b0, b0 + len(rng)};
    const auto ab = order_relation(a, b, 0.1), ba = order_relation(b, a, 0.1);
    const int count = (ab == Ordering::Before) + (ab == Ordering::After) + (ab == Ordering::Simultaneous);
    ASSERT_EQ(count, 1);
    ASSERT_EQ(ab == Ordering::Before, ba == Ordering::After);
    ASSERT_EQ(ab == Ordering::Simultaneous, ba == Ordering::Simultaneous);
    ASSERT_EQ(order_relation(a, a, 0.1), Ordering::Simultaneous);
  }
}

TEST(Periodicity, StopAndGoIsTenSeconds) {
  const auto seq = extract_state_sequence(track(0, 29.5, 2, square_wave(5, 5)), ElementClass::Cyclist, kParams);
  const auto p = detect_periodicity(seq);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(*p, 10.0, 1e-9);
}

TEST(Periodicity, TrafficLightCycleIsSixtySeconds) {
  std::vector<StateInterval> seq;
  for (int c = 0; c < 3; ++c) {
    seq.push_back({{c * 60.0, c * 60.0 + 30}, MotionState::Moving});
    seq.push_back({{c * 60.0 + 30, c * 60.0 + 60}, MotionState::Stopped});
  }
  const auto p = detect_periodicity(seq);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR(*p, 60.0, 1e-9);
}

TEST(Periodicity, NoneForShortOrIrregular) {
  EXPECT_FALSE(detect_periodicity({{{0, 10}, MotionState::Moving}}).has_value());
  std::vector<StateInterval> irregular{{{0, 5}, MotionState::Moving},
                                       {{5, 6}, MotionState::Stopped},
                                       {{6, 20}, MotionState::Moving},
                                       {{20, 21}, MotionState::Parked},
                                       {{21, 30}, MotionState::Moving}};
  EXPECT_FALSE(detect_periodicity(irregular).has_value());
}

TEST(Differentiate, ExactForQuadraticsOnUnevenGrid) {
  const std::vector<double> ts{0.0, 0.3, 0.5, 1.2, 1.25, 2.0};
  std::vector<TimedVec> f;
  for (double t : ts) f.push_back({t, Vec3(1 + 2 * t - 0.5 * t * t, 3 * t, 0)});
  const auto d = differentiate(f);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    EXPECT_NEAR(d[i].value.x(), 2 - ts[i], 1e-9) << i;
    EXPECT_NEAR(d[i].value.y(), 3, 1e-9) << i;
  }
  const auto two = differentiate({{0, Vec3(0, 0, 0)}, {2, Vec3(4, 0, 0)}});
  EXPECT_NEAR(two[0].value.x(), 2.0, 1e-12);
  EXPECT_NEAR(two[1].value.x(), 2.0, 1e-12);
}

TEST(Priority, RulesFromContext) {
  Context c;
  Rule r;
  r.id = "crossing";
  r.kind = RuleKind::Traffic;
  r.params["type"] = std::string("crossing_priority");
  r.params["holder"] = std::string("cyclist_1");
  r.params["yielders"] = std::string("car_mint ego");
  r.params["since"] = Quantity{-3.0, Unit::Second};
  c.rules.push_back(r);
  Rule other = r;
  other.params["type"] = std::string("speed_limit");
  c.rules.push_back(other);
  const auto rules = priority_rules(c);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules[0].holder, "cyclist_1");
  EXPECT_EQ(rules[0].yielders, (std::vector<std::string>{"car_mint", "ego"}));
  EXPECT_DOUBLE_EQ(rules[0].since, -3.0);
}

}  // namespace
}  // namespace scenu
