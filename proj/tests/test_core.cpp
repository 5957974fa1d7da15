#include <gtest/gtest.h>

#include <fstream>
#include <numbers>
#include <sstream>

#include "generators.hpp"
#include "scenu/config.hpp"
#include "scenu/json_io.hpp"
#include "scenu/validate.hpp"

namespace scenu {
namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string fixture(const std::string& id, const std::string& file) {
  return std::string(SCENU_SOURCE_DIR) + "/data/fixtures/v1/" + id + "/" + file;
}

TEST(Vocab, TermTokensAndParsing) {
  Term<ElementClass> c = ElementClass::PublicTransport;
  EXPECT_EQ(c.token(), "public_transport");
  auto o = Term<ElementClass>::other("scooter");
  EXPECT_EQ(o.token(), "other(scooter)");
  EXPECT_EQ(parse_enum<Relation>("front_of"), Relation::FrontOf);
  EXPECT_FALSE(parse_enum<Relation>("in_front").has_value());
}

TEST(Numbers, SixSignificantDigitsNoNegativeZero) {
  EXPECT_EQ(format_number(3.42), "3.42");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333");
  EXPECT_EQ(format_number(-1e-20), "-1e-20");
}

TEST(Rotation, YawRoundTrip) {
  for (double yaw : {0.0, 0.5, -1.2, 3.0}) {
    EXPECT_NEAR(yaw_of(rotation_from_yaw(yaw)), yaw, 1e-12);
    const Vec3 rpy = rpy_from_rotation(rotation_from_rpy(0.1, -0.2, yaw));
    EXPECT_NEAR(rpy.x(), 0.1, 1e-12);
    EXPECT_NEAR(rpy.y(), -0.2, 1e-12);
    EXPECT_NEAR(rpy.z(), yaw, 1e-12);
  }
}

TEST(Refs, DerivedAndExplicit) {
  SemanticAnnotation s;
  s.element_id = "pedestrian_1";
  s.t = -2.0;
  EXPECT_EQ(annotation_ref(s), "sem:pedestrian_1@-2");
  s.id = "custom";
  EXPECT_EQ(annotation_ref(s), "custom");
  TemporalAnnotation t;
  t.element_id = "cyclist_1";
  EXPECT_EQ(annotation_ref(t), "temp:cyclist_1");
  PredictedEvent e{2.0, EventTag::Reappears, {"cyclist_1"}, ""};
  EXPECT_EQ(event_ref(e), "event:reappears:cyclist_1");
}

TEST(Config, DefaultsHashAndOverride) {
  RunConfig c = RunConfig::defaults();
  EXPECT_DOUBLE_EQ(c.geometry.near_radius, 10.0);
  EXPECT_DOUBLE_EQ(c.temporal.still_speed, 0.1);
  EXPECT_DOUBLE_EQ(c.physics.rss.response_time, 1.0);
  const std::string h = config_hash(c);
  EXPECT_EQ(h, config_hash(RunConfig::defaults()));
  apply_override(c, "geometry.near_radius=8");
  EXPECT_DOUBLE_EQ(c.geometry.near_radius, 8.0);
  EXPECT_NE(config_hash(c), h);
  EXPECT_THROW(apply_override(c, "geometry.near_radius=-1"), Error);
  EXPECT_THROW(apply_override(c, "nonsense"), Error);
  EXPECT_THROW(apply_override(c, "geometry.bogus=8"), Error);
  EXPECT_THROW(apply_override(c, "nosection.near_radius=8"), Error);
  const RunConfig back = config_from_json(to_json(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Validate, EmptyScenarioIsValid) {
  ScenarioDescription d;
  const auto r = validate_description(d);
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Validate, FixtureGroundTruthIsValid) {
  for (const char* id : {"scenario1", "scenario1_followup", "scenario2"}) {
    const auto r = validate_document(slurp(fixture(id, "gt.json")));
    EXPECT_TRUE(r.ok()) << id << ": " << to_json(r).dump();
  }
}

TEST(Validate, InjectedSemanticFieldIsPartitionViolation) {
  json j = json::parse(slurp(fixture("scenario1", "gt.json")));
  j["spatial"][0]["state"] = "walking";
  const auto r = validate_json(j);
  EXPECT_TRUE(r.has("DIM_PARTITION"));
  EXPECT_FALSE(dimension_partition_check(j));
}

TEST(Validate, DoubleRegistrationBreaksPartition) {
  json j = json::parse(slurp(fixture("scenario1", "gt.json")));
  EXPECT_TRUE(dimension_partition_check(j));
  j["semantic"][0]["id"] = "shared";
  j["spatial"][0]["id"] = "shared";
  EXPECT_FALSE(dimension_partition_check(j));
}

TEST(Validate, TimeKindIsEnforced) {
  json j = json::parse(slurp(fixture("scenario1", "gt.json")));
  json sem = j["semantic"][0];
  sem["interval"] = {-1.0, 0.0};
  j["semantic"][0] = sem;
  EXPECT_TRUE(validate_json(j).has("TIME_KIND"));
}

TEST(Validate, SchemasAreDisjoint) {
  const std::array dims{Dimension::Semantic, Dimension::Spatial, Dimension::Temporal, Dimension::Physical};
  for (auto a : dims) {
    for (auto b : dims) {
      if (a == b) continue;
      for (const auto& k : dimension_keys(a)) EXPECT_FALSE(dimension_keys(b).count(k)) << k;
    }
    for (const auto& k : identity_keys()) EXPECT_FALSE(dimension_keys(a).count(k)) << k;
  }
}

TEST(Validate, TypedChecks) {
  ScenarioDescription d;
  d.window = {-2, 0};
  d.elements.push_back({"a", {}});
  d.elements.push_back({"a", {}});
  d.ego_id = "ghost";
  SpatialAnnotation s;
  s.element_id = "a";
  s.t = 1.0;
  s.distance_to_ego = -1.0;
  s.occupancy = Extent{0.0, 1.0, 1.0};
  s.topology.push_back({"a", Relation::Near});
  d.spatial.push_back(s);
  d.spatial.push_back(s);
  TemporalAnnotation t;
  t.element_id = "missing";
  t.interval = {-1, -1};
  d.temporal.push_back(t);
  const auto r = validate_description(d);
  for (const char* code : {"DUPLICATE_ID", "EGO", "SNAPSHOT_TIME", "NEG_DISTANCE", "EXTENT", "SELF_RELATION",
                           "DUPLICATE_ANNOTATION", "UNKNOWN_ELEMENT", "INTERVAL"}) {
    EXPECT_TRUE(r.has(code)) << code;
  }
}

TEST(Validate, StateSequenceMustPartition) {
  ScenarioDescription d;
  d.window = {-4, 0};
  d.elements.push_back({"a", {}});
  TemporalAnnotation t;
  t.element_id = "a";
  t.interval = {-4, 0};
  t.state_sequence = {{{-4, -2}, MotionState::Moving}, {{-1, 0}, MotionState::Stopped}};
  d.temporal.push_back(t);
  EXPECT_TRUE(validate_description(d).has("STATE_SEQUENCE"));
}

TEST(Validate, MalformedDocumentIsOneStructureViolation) {
  const auto r = validate_document("{\"elements\": 3}");
  EXPECT_TRUE(r.has("STRUCTURE"));
  EXPECT_TRUE(validate_document("not json").has("STRUCTURE"));
}

TEST(Validate, ActionRefsMustResolve) {
  ScenarioDescription d;
  d.window = {-1, 0};
  d.elements.push_back({"a", {}});
  SemanticAnnotation s;
  s.element_id = "a";
  d.semantic.push_back(s);
  d.context.driver_channel.push_back({-0.5, "hello"});
  std::vector<Action> acts{{TaskKind::Decision, ActionVerb::Yield, {"sem:a@0", "utterance:0"}}};
  EXPECT_TRUE(validate_actions(acts, d).ok());
  acts[0].justification.push_back("spat:a@0");
  EXPECT_TRUE(validate_actions(acts, d).has("UNRESOLVED_REF"));
}

TEST(Json, FixtureRoundTrip) {
  for (const char* id : {"scenario1", "scenario2"}) {
    const std::string text = slurp(fixture(id, "gt.json"));
    const auto d = description_from_json(json::parse(text));
    EXPECT_EQ(dump(to_json(d)), text) << id;
    const std::string atext = slurp(fixture(id, "gt_anticipation.json"));
    EXPECT_EQ(dump(to_json(anticipation_from_json(json::parse(atext)))), atext) << id;
  }
}

TEST(Json, StructureErrorsCarryPaths) {
  try {
    description_from_json(json::parse(R"({"id": "x", "window": [-1, 0], "ego_id": "", "elements": [{"id": 5}]})"));
    FAIL() << "expected StructureError";
  } catch (const StructureError& e) {
    EXPECT_EQ(e.path().rfind("/elements/0", 0), 0u) << e.path();
  }
}

// Dimension partition and continuous/discrete typing over generated cases.
TEST(Properties, PartitionAndTypingOnGeneratedDescriptions) {
  testgen::Gen g(11);
  for (int i = 0; i < 1000; ++i) {
    const auto d = g.description();
    const json j = to_json(d);
    ASSERT_TRUE(validate_description(d).ok()) << i << " " << to_json(validate_description(d)).dump();
    ASSERT_TRUE(dimension_partition_check(j)) << i;
    ASSERT_TRUE(dimension_partition_check(d)) << i;
    for (const char* list : {"semantic", "spatial"}) {
      for (const auto& a : j[list]) {
        ASSERT_TRUE(a.contains("t") && !a.contains("interval"));
      }
    }
    for (const char* list : {"temporal", "physical"}) {
      for (const auto& a : j[list]) {
        ASSERT_TRUE(a.contains("interval") && !a.contains("t"));
      }
    }
    if (!j["temporal"].empty()) {
      json m = j;
      m["temporal"][0]["t"] = 0.0;
      ASSERT_TRUE(validate_json(m).has("TIME_KIND")) << i;
    }
    if (!j["spatial"].empty()) {
      json m = j;
      m["spatial"][0]["model"] = "static";
      ASSERT_FALSE(dimension_partition_check(m)) << i;
    }
  }
}

}  // namespace
}  // namespace scenu
