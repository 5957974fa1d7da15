#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "generators.hpp"
#include "oracles.hpp"
#include "scenu/cli.hpp"
#include "scenu/derive.hpp"
#include "scenu/dsl.hpp"
#include "scenu/evaluation.hpp"
#include "scenu/geometry.hpp"
#include "scenu/json_io.hpp"
#include "scenu/physics.hpp"
#include "scenu/validate.hpp"

namespace {

using namespace scenu;
namespace fs = std::filesystem;
using nlohmann::json;
constexpr double kPi = std::numbers::pi;

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fixture(const std::string& id, const std::string& file) {
  return fs::path(SCENU_SOURCE_DIR) / "data/fixtures/v1" / id / file;
}

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

ScenarioDescription derive_fixture(const std::string& id) {
  const auto log = parse_trajectory_log(slurp(fixture(id, "trajectory.log")));
  if (!log.ok()) throw Error("fixture log for " + id + " does not parse");
  const auto scene = scene_context_from_json(json::parse(slurp(fixture(id, "context.json"))));
  return derive_description(*log.value, scene, RunConfig::defaults());
}

const SpatialAnnotation* spatial_at(const ScenarioDescription& d, const std::string& id, double t) {
  for (const auto& s : d.spatial) {
    if (s.element_id == id && s.t == t) return &s;
  }
  return nullptr;
}

const SemanticAnnotation* semantic_at(const ScenarioDescription& d, const std::string& id, double t) {
  for (const auto& s : d.semantic) {
    if (s.element_id == id && s.t == t) return &s;
  }
  return nullptr;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

Check scenario_one() {
  Check c;
  const auto d = derive_fixture("scenario1");
  const double t = d.window.end;
  const auto* ped = spatial_at(d, "pedestrian_1", t);
  const auto* bottle = spatial_at(d, "bottle_1", t);
  c.expect(ped && ped->distance_to_ego && near(*ped->distance_to_ego, 3.42, 1e-6), "pedestrian distance_to_ego");
  c.expect(bottle && bottle->distance_to_ego && near(*bottle->distance_to_ego, 1.98, 1e-6), "bottle distance_to_ego");
  c.expect(bottle && bottle->occupancy && near(occupancy_volume(*bottle->occupancy), 0.001, 1e-4), "bottle volume");
  if (ped) {
    std::set<Relation> directional;
    for (const auto& e : ped->topology) {
      const auto r = e.relation.value();
      if (e.other == "ego" && (r == Relation::FrontOf || r == Relation::Behind || r == Relation::LeftOf ||
                               r == Relation::RightOf)) {
        directional.insert(r);
      }
    }
    c.expect(directional == std::set<Relation>{Relation::FrontOf}, "pedestrian relation to ego");
  }
  const auto* sem = semantic_at(d, "pedestrian_1", t);
  c.expect(sem && sem->state && sem->state->value() == MotionState::Walking, "pedestrian state");
  bool taxi_static = false;
  for (const auto& p : d.physical) {
    if (p.element_id == "taxi_1") taxi_static = p.model == PhysicalModel::Static;
  }
  c.expect(taxi_static, "taxi model");
  return c;
}

Check scenario_two() {
  Check c;
  const RunConfig cfg = RunConfig::defaults();
  const auto d = derive_fixture("scenario2");
  const double t = d.window.end;
  auto box_at = [&](const std::string& id) {
    return element_box(interpolate(d.find_element(id)->trajectory, t), body_geometry(d, id, t, cfg));
  };
  const Box ego = box_at("ego"), cyc = box_at("cyclist_1"), bus = box_at("bus_1");
  const auto occ = occlusion_state(ego.fp.center, cyc.fp, {bus.fp});
  c.expect(occ.state == Visibility::Occluded, "cyclist occlusion state");
  const auto a = anticipate(d, cfg);
  bool reappears = false;
  for (const auto& e : a.events) {
    if (e.tag == EventTag::Reappears && e.elements == std::vector<std::string>{"cyclist_1"} && e.t > 0 &&
        e.t <= a.horizon) {
      reappears = true;
    }
  }
  c.expect(reappears, "reappears event for cyclist_1");
  TaskSpec task;
  task.kind = TaskKind::Interaction;
  std::vector<ActionVerb> verbs;
  for (const auto& act : decide(d, &a, task, cfg)) verbs.push_back(act.verb);
  c.expect(verbs == std::vector<ActionVerb>{ActionVerb::Yield, ActionVerb::InformDriver}, "decided actions");
  return c;
}

Check oracle_equivalence() {
  Check c;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> pos(-50, 50), ang(-kPi, kPi);
  for (int i = 0; i < 10000 && c.ok; ++i) {
    const Vec3 ref(pos(rng), pos(rng), 0), target(pos(rng), pos(rng), pos(rng));
    const double heading = ang(rng);
    const auto ours = classify_directional_relation(ref, heading, target);
    c.expect(std::set<Relation>(ours.begin(), ours.end()) ==
                 oracle::quadrant(ref.head<2>(), heading, target.head<2>()),
             "directional case " + std::to_string(i));
  }
  std::uniform_real_distribution<double> p8(-8, 8), ext(0.2, 5), z(0, 3);
  for (int i = 0; i < 10000 && c.ok; ++i) {
    const Box a = make_box({p8(rng), p8(rng), z(rng)}, rotation_from_yaw(ang(rng)), {ext(rng), ext(rng), ext(rng)});
    const Box b = make_box({p8(rng), p8(rng), z(rng)}, rotation_from_yaw(ang(rng)), {ext(rng), ext(rng), ext(rng)});
    c.expect(near(surface_distance(a, b), oracle::sampled_distance(a, b, 2500), 1e-3),
             "distance case " + std::to_string(i));
  }
  std::uniform_real_distribution<double> p20(-20, 20), ext6(0.3, 6);
  int compared = 0;
  for (int i = 0; i < 10000 && c.ok; ++i) {
    const Vec2 eye(0, 0);
    const Footprint target = make_footprint({p20(rng), p20(rng)}, ang(rng), ext6(rng), ext6(rng));
    std::vector<Footprint> occ;
    const int n = static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) {
      const Footprint f = make_footprint({p20(rng), p20(rng)}, ang(rng), ext6(rng), ext6(rng));
      if (!f.contains(eye, 1e-6)) occ.push_back(f);
    }
    const auto ours = occlusion_state(eye, target, occ).state;
    const auto ref = oracle::dense_sweep(eye, target, occ).state;
    if (ref != Visibility::PartiallyOccluded) {
      ++compared;
      c.expect(ours == ref, "occlusion case " + std::to_string(i));
    }
  }
  if (c.ok) c.detail = std::to_string(compared) + " visible/full occlusion verdicts compared";
  return c;
}

Check invariants() {
  Check c;
  const auto scoring = RunConfig::defaults().scoring;
  testgen::Gen g(103);
  for (int i = 0; i < 1000 && c.ok; ++i) {
    const auto d = g.description();
    const auto a = g.anticipation(d);
    const json j = to_json(d);
    const std::string at = " case " + std::to_string(i);
    c.expect(dimension_partition_check(j) && dimension_partition_check(d), "dimension partition" + at);
    bool typed = validate_description(d).ok();
    for (const char* list : {"semantic", "spatial"}) {
      for (const auto& x : j[list]) typed = typed && x.contains("t") && !x.contains("interval");
    }
    for (const char* list : {"temporal", "physical"}) {
      for (const auto& x : j[list]) typed = typed && x.contains("interval") && !x.contains("t");
    }
    if (!j["temporal"].empty()) {
      json m = j;
      m["temporal"][0]["t"] = 0.0;
      typed = typed && validate_json(m).has("TIME_KIND");
    }
    c.expect(typed, "continuous/discrete typing" + at);

    const auto self = score_understanding(d, &a, d, &a, scoring);
    bool perfect = self.anticipation && self.anticipation->f1 == 1.0;
    for (const auto& dim : self.dimensions) perfect = perfect && dim.f1 == 1.0;
    c.expect(perfect, "score identity" + at);

    auto cand = g.description();
    cand.elements = d.elements;
    auto ca = g.anticipation(d);
    const std::string before = to_json(score_understanding(d, &a, cand, &ca, scoring), "s", "c", "h").dump();
    std::shuffle(cand.semantic.begin(), cand.semantic.end(), g.rng());
    std::shuffle(cand.spatial.begin(), cand.spatial.end(), g.rng());
    std::shuffle(cand.temporal.begin(), cand.temporal.end(), g.rng());
    std::shuffle(cand.physical.begin(), cand.physical.end(), g.rng());
    std::shuffle(cand.elements.begin(), cand.elements.end(), g.rng());
    for (auto& s : cand.spatial) std::reverse(s.topology.begin(), s.topology.end());
    std::shuffle(ca.events.begin(), ca.events.end(), g.rng());
    std::shuffle(ca.tracks.begin(), ca.tracks.end(), g.rng());
    c.expect(before == to_json(score_understanding(d, &a, cand, &ca, scoring), "s", "c", "h").dump(),
             "permutation invariance" + at);
  }

  std::mt19937_64 rng(107);
  std::uniform_real_distribution<double> u(-10, 10), h(0.1, 5);
  for (int i = 0; i < 1000 && c.ok; ++i) {
    KinematicState s;
    s.position = Vec3(u(rng), u(rng), 0);
    s.velocity = Vec3(u(rng), u(rng), 0);
    s.acceleration = Vec3(u(rng) / 5, u(rng) / 5, 0);
    s.speed = s.velocity.norm();
    const double h1 = h(rng), h2 = h(rng);
    for (auto kind : {MotionKind::Static, MotionKind::ConstantVelocity, MotionKind::ConstantAcceleration}) {
      MotionModel m;
      m.kind = kind;
      const auto whole = predict_from(s, m, h1 + h2, 0.1);
      const auto split = predict_from(predict_from(s, m, h1, 0.1).end, m, h2, 0.1);
      const double tol = kind == MotionKind::ConstantAcceleration ? 1e-6 : 1e-9;
      c.expect((whole.end.position - split.end.position).norm() <= tol, "semigroup case " + std::to_string(i));
    }
  }
  return c;
}

Check dsl_robustness() {
  Check c;
  std::mt19937_64 rng(109);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 200);
  for (int i = 0; i < 100000; ++i) {
    std::string s(static_cast<std::size_t>(len(rng)), '\0');
    for (auto& ch : s) ch = static_cast<char>(byte(rng));
    const auto r = parse_annotation_text(s);
    c.expect(r.ok() || !r.errors.empty(), "fuzz input " + std::to_string(i) + " failed without a diagnostic");
  }
  testgen::Gen g(113);
  for (int i = 0; i < 1000 && c.ok; ++i) {
    const auto d = g.description();
    const auto a = g.anticipation(d);
    const std::string text = serialize(d, &a);
    const auto r = parse_annotation_text(text);
    const std::string at = " document " + std::to_string(i);
    c.expect(r.ok(), "parse of generated" + at);
    if (!r.ok()) break;
    c.expect(json_approx_equal(to_json(canonicalize(d)), to_json(r.value->description), 1e-5, nullptr),
             "description round trip" + at);
    c.expect(r.value->anticipation && json_approx_equal(to_json(canonicalize(a)), to_json(*r.value->anticipation),
                                                        1e-5, nullptr),
             "anticipation round trip" + at);
    c.expect(serialize(r.value->description, r.value->anticipation ? &*r.value->anticipation : nullptr) == text,
             "text round trip" + at);
  }
  return c;
}

Check rss() {
  Check c;
  c.expect(near(rss_longitudinal_safe_distance(10, 0, 1, 2, 4, 8), 29.0, 1e-9), "documented parameter set");
  double prev = -1.0;
  for (int i = 0; i < 100; ++i) {
    const double d = rss_longitudinal_safe_distance(0.4 * i, 5.0, 1, 2, 4, 8);
    c.expect(d >= prev, "monotonicity at grid point " + std::to_string(i));
    prev = d;
  }
  return c;
}

struct Run {
  int code;
  std::string out;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str()};
}

std::string tree_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + slurp(f);
  return all;
}

Check determinism() {
  Check c;
  std::vector<std::vector<std::string>> commands;
  for (const char* id : {"scenario1", "scenario1_followup", "scenario2"}) {
    commands.push_back({"derive", "--log", fixture(id, "trajectory.log").string(), "--context",
                        fixture(id, "context.json").string()});
    commands.push_back({"--format", "json", "predict", fixture(id, "gt.json").string()});
  }
  commands.push_back({"--format", "json", "score", "--gt", fixture("scenario1", "gt.json").string(),
                      "--gt-anticipation", fixture("scenario1", "gt_anticipation.json").string(), "--candidate",
                      (fs::path(SCENU_SOURCE_DIR) / "data/candidates/scenario1/candidate.sdl").string()});
  for (const auto& cmd : commands) {
    const auto a = cli(cmd), b = cli(cmd);
    c.expect(a.code == kExitOk && a.out == b.out && !a.out.empty(), "re-run of " + cmd[cmd[0] == "--format" ? 2 : 0]);
  }
  const fs::path base = fs::temp_directory_path() / "scenu_acceptance";
  fs::remove_all(base);
  const fs::path one = base / "one", two = base / "two";
  c.expect(cli({"fixtures", "all", one.string()}).code == kExitOk, "fixtures emission");
  c.expect(cli({"fixtures", "all", two.string()}).code == kExitOk, "fixtures emission");
  if (c.ok) {
    c.expect(tree_digest(one) == tree_digest(two), "fixtures re-run");
    c.expect(tree_digest(one / "scenario2") == tree_digest(fixture("scenario2", "").parent_path()),
             "fixtures match stored copies");
  }
  fs::remove_all(base);
  return c;
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<Check()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC1 scenario 1 reproduction", 1.0, scenario_one},
      {"AC2 scenario 2 reproduction", 1.0, scenario_two},
      {"AC3 oracle equivalence", 60.0, oracle_equivalence},
      {"AC4 framework invariants", 120.0, invariants},
      {"AC5 DSL robustness", 0.0, dsl_robustness},
      {"AC6 RSS closed form", 0.0, rss},
      {"AC7 determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Check c;
    try {
      c = cr.run();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.ok && cr.limit_s > 0 && secs >= cr.limit_s) {
      c.ok = false;
      c.detail = "runtime over " + std::to_string(cr.limit_s) + " s";
    }
    std::printf("%s %s (%.3f s)%s%s\n", c.ok ? "PASS" : "FAIL", cr.name, secs, c.detail.empty() ? "" : ": ",
                c.detail.c_str());
    std::fflush(stdout);
    if (!c.ok) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
