#include "scenu/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "scenu/json_io.hpp"
#include "scenu/physics.hpp"

namespace scenu {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRate = 5.0;  // Hz
constexpr int kSteps = 30;     // 6 s window at 5 Hz

double wrap(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

class LogBuilder {
 public:
  explicit LogBuilder(std::string ego) {
    log_.ego_id = std::move(ego);
    log_.rate = kRate;
  }

  template <class F>
  void track(const std::string& id, const std::string& cls, F pose) {
    for (int k = -kSteps; k <= 0; ++k) {
      const double t = k / kRate;
      TrajectoryRow r = pose(t);
      r.t = t;
      r.id = id;
      r.class_hint = cls;
      log_.rows.push_back(r);
    }
  }

  TrajectoryLog finish() {
    std::sort(log_.rows.begin(), log_.rows.end(),
              [](const auto& a, const auto& b) { return std::tie(a.t, a.id) < std::tie(b.t, b.id); });
    return log_;
  }

 private:
  TrajectoryLog log_;
};

TrajectoryRow row(double x, double y, double z, double yaw, double speed) {
  TrajectoryRow r;
  r.x = x;
  r.y = y;
  r.z = z;
  r.yaw = wrap(yaw);
  r.speed = speed;
  return r;
}

Param text(const std::string& s) { return s; }
Param seconds(double v) { return Quantity{v, Unit::Second}; }

ElementContext element(Term<ElementClass> cls, Extent extent, std::vector<std::string> attributes,
                       std::vector<Term<Affordance>> affordances, std::vector<std::string> materials) {
  ElementContext e;
  e.class_ = cls;
  e.extent = extent;
  e.attributes = std::move(attributes);
  e.affordances = std::move(affordances);
  e.materials = std::move(materials);
  return e;
}

std::vector<ModalitySample> every_two_seconds(const std::string& prefix) {
  std::vector<ModalitySample> out;
  for (int k = -3; k <= 0; ++k) out.push_back({2.0 * k, prefix + std::to_string(k + 3)});
  return out;
}

const Extent kCar{4.6, 1.8, 1.5};

// Taxi pick-up at the roadside. Ego lane centered on y = 0, curb at y = -1.75.
FixtureSource scenario1(bool followup) {
  FixtureSource f;
  LogBuilder b("ego");
  // Decelerates at 0.5 m/s^2 from 2 m/s and stands from t = -2.
  b.track("ego", "vehicle", [](double t) {
    const double r = std::max(0.0, -2.0 - t);
    return row(-0.25 * r * r, 0.0, 0.75, 0.0, 0.5 * r);
  });
  if (!followup) {
    // Crosses towards the taxi at 1.2 m/s; front face 3.42 m ahead of the ego front at t = 0.
    b.track("pedestrian_1", "pedestrian",
            [](double t) { return row(5.97, 0.6 - 1.2 * t, 0.875, -kPi / 2.0, 1.2); });
  } else {
    // Seated in the taxi.
    b.track("pedestrian_1", "pedestrian", [](double) { return row(8.0, -2.4, 0.875, kPi / 2.0, 0.0); });
  }
  // 0.25 x 0.08 x 0.05 m lying 1.98 m ahead of the ego front.
  b.track("bottle_1", "static_object", [](double) { return row(4.405, -0.3, 0.025, 0.0, 0.0); });
  b.track("taxi_1", "vehicle", [](double) { return row(8.0, -2.4, 0.75, 0.0, 0.0); });
  f.log = b.finish();

  auto& s = f.scene;
  s.scenario_id = followup ? "scenario1_followup" : "scenario1";
  s.context.layers[1] = {{"road_main", "road", "two-lane urban street"},
                         {"crosswalk_1", "crosswalk", "pedestrian crossing ahead of the taxi"}};
  s.context.layers[2] = {{"curb_south", "curb", "raised curb along the right edge"}};
  s.context.layers[5] = {{"daylight", "environment", "daylight, dry road"}};
  s.context.rules.push_back({"pedestrian_priority",
                             RuleKind::Traffic,
                             {{"type", text("crossing_priority")},
                              {"holder", text("pedestrian_1")},
                              {"yielders", text("ego")},
                              {"since", seconds(-2.0)}}});
  s.context.rules.push_back({"do_no_harm", RuleKind::Value, {{"text", text("never endanger vulnerable road users")}}});
  s.modalities = {{ModalityKind::Visual, "front_camera", every_two_seconds("frame_")},
                  {ModalityKind::Kinematic, "imu", every_two_seconds("imu_")}};

  s.elements["ego"] = element(ElementClass::Vehicle, kCar, {"grey"}, {}, {"metal"});
  s.elements["pedestrian_1"] =
      element(ElementClass::Pedestrian, {0.5, 0.5, 1.75}, {"green t-shirt"},
              {Affordance::CanSignal, Affordance::CanEnterVehicle, Affordance::CanCross}, {});
  s.elements["bottle_1"] = element(ElementClass::StaticObject, {0.25, 0.08, 0.05}, {"plastic bottle"},
                                   {Affordance::CanBeRunOver}, {"plastic", "transparent"});
  ElementContext taxi = element(ElementClass::Vehicle, kCar, {"yellow", followup ? "doors closed" : "back door open"},
                                {Affordance::CanOcclude}, {"metal"});
  if (!followup) taxi.inflation = ExtentInflation{"left", 0.9};
  s.elements["taxi_1"] = taxi;

  f.task.kind = TaskKind::Decision;
  f.expected_verbs = {followup ? ActionVerb::ProceedSlow : ActionVerb::Yield};
  f.notes = followup ? "pedestrian seated in the taxi, door closed; bottle still ahead"
                     : "taxi stationary for the whole 6 s window (several seconds); open back door widens it by 0.9 m";
  return f;
}

// Dynamic occlusion of a cyclist by a turning bus.
FixtureSource scenario2() {
  FixtureSource f;
  LogBuilder b("ego");
  // Decelerates at 1 m/s^2 from 2 m/s and stands from t = -4.
  b.track("ego", "vehicle", [](double t) {
    const double r = std::max(0.0, -4.0 - t);
    return row(-0.5 * r * r, 0.0, 0.75, 0.0, r);
  });
  // Southbound at 3 m/s along x = 9.25, then a left turn of radius 12 m from t = -3.2.
  constexpr double R = 12.0, cx = 21.25, cy = 12.0, v = 3.0, t_turn = -3.2;
  b.track("bus_1", "public_transport", [&](double t) {
    if (t <= t_turn) return row(cx - R, cy + v * (t_turn - t), 1.6, -kPi / 2.0, v);
    const double phi = kPi + v * (t - t_turn) / R;
    return row(cx + R * std::cos(phi), cy + R * std::sin(phi), 1.6, phi + kPi / 2.0, v);
  });
  b.track("cyclist_1", "cyclist", [](double t) { return row(20.0, 6.75 - 1.2 * t, 0.85, -kPi / 2.0, 1.2); });
  // Creeps forward at 0.05 m/s waiting at the crosswalk on the far side.
  b.track("car_mint", "vehicle", [](double t) { return row(24.5 - 0.05 * t, 3.5, 0.75, kPi, 0.05); });
  f.log = b.finish();

  auto& s = f.scene;
  s.scenario_id = "scenario2";
  s.context.layers[1] = {{"intersection_1", "intersection", "four-way urban intersection"},
                         {"crosswalk_east", "crosswalk", "pedestrian crossing on the east arm"}};
  s.context.layers[4] = {{"bus_route", "transit", "bus line turning left at the intersection"}};
  s.context.layers[6] = {{"hmi", "digital", "speech interface to the driver"}};
  s.context.rules.push_back({"cyclist_priority",
                             RuleKind::Traffic,
                             {{"type", text("crossing_priority")},
                              {"holder", text("cyclist_1")},
                              {"yielders", text("car_mint ego")},
                              {"since", seconds(-3.0)}}});
  s.context.driver_channel = {{-1.0, "why are we waiting here?"}};
  s.modalities = {{ModalityKind::Visual, "cameras", every_two_seconds("frame_")},
                  {ModalityKind::Spatial, "top_lidar", every_two_seconds("sweep_")},
                  {ModalityKind::Geospatial, "gps", every_two_seconds("fix_")},
                  {ModalityKind::Kinematic, "imu", every_two_seconds("imu_")},
                  {ModalityKind::Linguistic, "speech_to_text", {{-1.0, "utterance:0"}}}};

  s.elements["ego"] = element(ElementClass::Vehicle, kCar, {"grey"}, {}, {"metal"});
  s.elements["bus_1"] = element(ElementClass::PublicTransport, {12.0, 2.5, 3.2}, {"yellow"}, {Affordance::CanOcclude},
                                {"metal", "reflective"});
  s.elements["cyclist_1"] = element(ElementClass::Cyclist, {1.8, 0.6, 1.7}, {"red t-shirt"}, {Affordance::CanCross}, {});
  s.elements["car_mint"] = element(ElementClass::Vehicle, kCar, {"mint-green"}, {}, {"metal"});

  f.task.kind = TaskKind::Interaction;
  f.expected_verbs = {ActionVerb::Yield, ActionVerb::InformDriver};
  f.notes = "bus turn lasts several seconds (from t = -3.2 s through the horizon); cyclist hidden behind the bus at t = 0";
  return f;
}

json expected_action_json(const FixtureSource& f) {
  json verbs = json::array();
  for (auto v : f.expected_verbs) verbs.push_back(std::string(to_string(v)));
  return {{"task", std::string(to_string(f.task.kind))}, {"verbs", verbs}};
}

std::string checksum(const std::string& bytes) { return "fnv1a64:" + hex64(fnv1a64(bytes)); }

}  // namespace

std::vector<std::string> fixture_ids() { return {"scenario1", "scenario1_followup", "scenario2"}; }

FixtureSource fixture_source(const std::string& id) {
  if (id == "scenario1") return scenario1(false);
  if (id == "scenario1_followup") return scenario1(true);
  if (id == "scenario2") return scenario2();
  throw Error("unknown fixture '" + id + "' (known: scenario1, scenario1_followup, scenario2)");
}

std::vector<FixtureFile> build_fixture(const std::string& id) {
  const FixtureSource src = fixture_source(id);
  const RunConfig cfg = RunConfig::defaults();

  // Derive from the log as written, so re-deriving from the file reproduces gt exactly.
  const std::string log_text = serialize_log(src.log);
  const auto parsed = parse_trajectory_log(log_text);
  if (!parsed.ok()) throw Error("fixture log does not parse: " + to_string(parsed.errors.front()));
  const ScenarioDescription gt = derive_description(*parsed.value, src.scene, cfg);
  const ScenarioAnticipation ant = anticipate(gt, cfg);

  std::vector<FixtureFile> files{
      {"trajectory.log", log_text},
      {"context.json", dump(to_json(src.scene))},
      {"gt.json", dump(to_json(gt))},
      {"gt_anticipation.json", dump(to_json(ant))},
      {"expected_action.json", dump(expected_action_json(src))},
  };
  json sums = json::object();
  for (const auto& f : files) sums[f.name] = checksum(f.content);
  json manifest = {{"scenario_id", id},
                   {"version", kFixtureVersion},
                   {"task", std::string(to_string(src.task.kind))},
                   {"window_s", -gt.window.start},
                   {"horizon_s", cfg.anticipation.horizon},
                   {"notes", src.notes},
                   {"files",
                    {{"log", "trajectory.log"},
                     {"context", "context.json"},
                     {"gt_description", "gt.json"},
                     {"gt_anticipation", "gt_anticipation.json"},
                     {"expected_action", "expected_action.json"}}},
                   {"checksums", sums}};
  files.push_back({"manifest.json", dump(manifest)});
  return files;
}

std::vector<std::filesystem::path> emit_fixture(const std::string& id, const std::filesystem::path& out_dir) {
  const auto files = build_fixture(id);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> out;
  for (const auto& f : files) {
    const auto path = out_dir / f.name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << f.content;
    out.push_back(path);
  }
  return out;
}

std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
  std::vector<std::string> problems;
  std::ifstream is(dir / "manifest.json");
  if (!is) return {"missing manifest.json in " + dir.string()};
  json m;
  try {
    m = json::parse(is);
  } catch (const std::exception& e) {
    return {std::string("manifest.json is not JSON: ") + e.what()};
  }
  if (!m.contains("files") || !m.contains("checksums")) return {"manifest.json lacks files or checksums"};
  for (const auto& [role, name] : m.at("files").items()) {
    const auto path = dir / name.get<std::string>();
    std::ifstream f(path, std::ios::binary);
    if (!f) {
      problems.push_back("missing " + role + " file " + path.string());
      continue;
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    const auto& sums = m.at("checksums");
    const std::string key = name.get<std::string>();
    if (!sums.contains(key)) {
      problems.push_back("no checksum for " + key);
    } else if (sums.at(key).get<std::string>() != checksum(ss.str())) {
      problems.push_back("checksum mismatch for " + key);
    }
  }
  return problems;
}

}  // namespace scenu
