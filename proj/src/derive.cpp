#include "scenu/derive.hpp"

#include <algorithm>
#include <cmath>

#include "scenu/geometry.hpp"
#include "scenu/json_io.hpp"
#include "scenu/physics.hpp"
#include "scenu/temporal.hpp"

namespace scenu {

using nlohmann::json;

namespace {

constexpr double kTol = 1e-9;

template <class E>
Term<E> term_or_throw(const std::string& s, const std::string& path) {
  auto t = Term<E>::parse(s);
  if (!t) throw StructureError(path, "unknown term '" + s + "'");
  return *t;
}

std::vector<std::string> strings_at(const json& j, const char* key, const std::string& path) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  const json& a = j.at(key);
  if (!a.is_array()) throw StructureError(path + "/" + key, "expected an array of strings");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_string()) throw StructureError(path + "/" + key + "/" + std::to_string(i), "expected a string");
    out.push_back(a[i].get<std::string>());
  }
  return out;
}

Extent extent_at(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number()) {
    throw StructureError(path, "expected [length, width, height]");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

SceneContext scene_context_from_json(const json& j) {
  if (!j.is_object()) throw StructureError("", "scene context must be an object");
  SceneContext c;
  if (j.contains("scenario_id")) c.scenario_id = j.at("scenario_id").get<std::string>();
  if (j.contains("context")) c.context = context_from_json(j.at("context"));
  if (j.contains("modalities")) c.modalities = modalities_from_json(j.at("modalities"));
  if (!j.contains("elements")) return c;
  const json& els = j.at("elements");
  if (!els.is_object()) throw StructureError("/elements", "expected an object keyed by element id");
  for (const auto& [id, e] : els.items()) {
    const std::string path = "/elements/" + id;
    if (!e.is_object()) throw StructureError(path, "expected an object");
    ElementContext ec;
    if (e.contains("class")) ec.class_ = term_or_throw<ElementClass>(e.at("class").get<std::string>(), path + "/class");
    if (e.contains("extent")) ec.extent = extent_at(e.at("extent"), path + "/extent");
    if (e.contains("extent_inflation")) {
      const json& inf = e.at("extent_inflation");
      ExtentInflation x;
      x.side = inf.value("side", "left");
      x.amount = inf.value("amount", 0.0);
      if (x.side != "left" && x.side != "right" && x.side != "front" && x.side != "rear") {
        throw StructureError(path + "/extent_inflation/side", "side must be left, right, front or rear");
      }
      ec.inflation = x;
    }
    ec.attributes = strings_at(e, "attributes", path);
    for (const auto& a : strings_at(e, "affordances", path)) {
      ec.affordances.push_back(term_or_throw<Affordance>(a, path + "/affordances"));
    }
    ec.materials = strings_at(e, "materials", path);
    c.elements[id] = std::move(ec);
  }
  return c;
}

json to_json(const SceneContext& c) {
  json els = json::object();
  for (const auto& [id, e] : c.elements) {
    json o = json::object();
    if (e.class_) o["class"] = e.class_->token();
    if (e.extent) o["extent"] = {e.extent->length, e.extent->width, e.extent->height};
    if (e.inflation) o["extent_inflation"] = {{"side", e.inflation->side}, {"amount", e.inflation->amount}};
    if (!e.attributes.empty()) o["attributes"] = e.attributes;
    if (!e.affordances.empty()) {
      json a = json::array();
      for (const auto& x : e.affordances) a.push_back(x.token());
      o["affordances"] = a;
    }
    if (!e.materials.empty()) o["materials"] = e.materials;
    els[id] = o;
  }
  json mods = json::array();
  for (const auto& m : c.modalities) mods.push_back(to_json(m));
  return {{"scenario_id", c.scenario_id}, {"context", to_json(c.context)}, {"modalities", mods}, {"elements", els}};
}

InflatedBody inflate(const Extent& nominal, const std::optional<ExtentInflation>& inflation) {
  InflatedBody b{nominal, Vec3::Zero()};
  if (!inflation || inflation->amount == 0.0) return b;
  const double a = inflation->amount;
  if (inflation->side == "left" || inflation->side == "right") {
    b.extent.width += a;
    b.offset.y() = inflation->side == "left" ? a / 2.0 : -a / 2.0;
  } else {
    b.extent.length += a;
    b.offset.x() = inflation->side == "front" ? a / 2.0 : -a / 2.0;
  }
  return b;
}

std::vector<double> snapshot_times(const Interval& window, double spacing) {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double t = window.end - k * spacing;
    if (t < window.start - kTol) break;
    out.push_back(t);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {

bool covers(const Element& e, double t) {
  return !e.trajectory.empty() && t >= e.trajectory.front().t - kTol && t <= e.trajectory.back().t + kTol;
}

struct Body {
  Term<ElementClass> cls;
  InflatedBody geom;
};

// Occluder blocking the most sample rays; ties go to the smaller id.
// Finite differences of logged positions carry rounding residue.
std::vector<TimedVec> snapped(std::vector<TimedVec> series) {
  for (auto& s : series) {
    for (int i = 0; i < 3; ++i) {
      s.value[i] = std::round(s.value[i] * 1e6) / 1e6;
      if (s.value[i] == 0.0) s.value[i] = 0.0;
    }
  }
  return series;
}

std::string dominant_occluder(const Vec2& eye, const Footprint& target,
                              const std::vector<std::pair<std::string, Footprint>>& occluders) {
  std::array<Vec2, 5> pts;
  const auto c = target.corners();
  std::copy(c.begin(), c.end(), pts.begin());
  pts[4] = target.center;
  std::string best;
  int best_hits = 0;
  for (const auto& [id, fp] : occluders) {
    int hits = 0;
    for (const auto& p : pts) hits += segment_hits(eye, p, fp) ? 1 : 0;
    if (hits > best_hits) {
      best_hits = hits;
      best = id;
    }
  }
  return best;
}

}  // namespace

ScenarioDescription derive_description(const TrajectoryLog& log, const SceneContext& scene, const RunConfig& cfg) {
  ScenarioDescription d;
  d.id = scene.scenario_id;
  d.context = scene.context;
  d.modalities = scene.modalities;
  d.elements = log.elements();
  d.window = {0.0, 0.0};
  if (d.elements.empty()) return d;

  for (const auto& r : log.rows) {
    if (r.t > kTol) throw Error("derive: log row at t = " + format_number(r.t) + " lies after t = 0");
    d.window.start = std::min(d.window.start, r.t);
  }
  if (!d.find_element(log.ego_id)) throw Error("derive: ego '" + log.ego_id + "' has no rows in the log");
  d.ego_id = log.ego_id;

  const auto hints = log.class_hints();
  std::map<std::string, Body> bodies;
  std::map<std::string, const ElementContext*> ctx;
  for (const auto& e : d.elements) {
    auto it = scene.elements.find(e.id);
    const ElementContext* ec = it == scene.elements.end() ? nullptr : &it->second;
    ctx[e.id] = ec;
    Term<ElementClass> cls = Term<ElementClass>::other("unknown");
    if (ec && ec->class_) {
      cls = *ec->class_;
    } else if (auto h = hints.find(e.id); h != hints.end()) {
      auto parsed = Term<ElementClass>::parse(h->second);
      cls = parsed ? *parsed : Term<ElementClass>::other(h->second.empty() ? "unknown" : h->second);
    }
    const Extent nominal = ec && ec->extent ? *ec->extent : default_extent_for(cfg.physics, cls);
    bodies[e.id] = {cls, inflate(nominal, ec ? ec->inflation : std::nullopt)};
  }

  const auto rules = priority_rules(d.context);
  auto env_for = [&](const std::string& id) {
    StateEnv env;
    env.element_id = id;
    env.rules = rules;
    for (const auto& e : d.elements) env.trajectories[e.id] = &e.trajectory;
    return env;
  };
  auto box_at = [&](const Element& e, double t) {
    const StateSample s = interpolate(e.trajectory, t);
    return element_box(s, BodyGeometry{bodies[e.id].geom.extent, bodies[e.id].geom.offset});
  };

  // Semantic and spatial snapshots.
  for (double t : snapshot_times(d.window, cfg.derive.snapshot_interval)) {
    std::vector<SceneObject> snap;
    for (const auto& e : d.elements) {
      if (covers(e, t)) snap.push_back({e.id, t, box_at(e, t)});
    }
    const auto topo = derive_topology(snap, d.ego_id, cfg.geometry);
    const SceneObject* ego = nullptr;
    for (const auto& o : snap) {
      if (o.id == d.ego_id) ego = &o;
    }
    for (const auto& o : snap) {
      const Element& e = *d.find_element(o.id);
      const Body& body = bodies[o.id];
      const ElementContext* ec = ctx[o.id];
      const StateEnv env = env_for(o.id);

      SemanticAnnotation sem;
      sem.element_id = o.id;
      sem.t = t;
      sem.class_ = body.cls;
      if (ec) {
        sem.attributes = ec->attributes;
        sem.affordances = ec->affordances;
      }
      sem.state = classify_state(e.trajectory, body.cls, t, cfg.temporal, &env);
      d.semantic.push_back(std::move(sem));

      const StateSample pose = interpolate(e.trajectory, t);
      SpatialAnnotation sp;
      sp.element_id = o.id;
      sp.t = t;
      sp.position = pose.position + pose.orientation * body.geom.offset;
      sp.orientation = pose.orientation;
      sp.occupancy = body.geom.extent;
      if (ego && o.id != d.ego_id) sp.distance_to_ego = surface_distance(o.box, ego->box);
      if (auto it = topo.find(o.id); it != topo.end()) sp.topology = it->second;
      d.spatial.push_back(std::move(sp));
    }
  }

  // Temporal: kinematics, state and visibility sequences, orderings, period.
  std::map<std::string, Interval> active;
  const Element* ego = d.find_element(d.ego_id);
  for (const auto& e : d.elements) {
    if (e.trajectory.size() < 2) continue;
    const Body& body = bodies[e.id];
    const StateEnv env = env_for(e.id);
    TemporalAnnotation ta;
    ta.element_id = e.id;
    ta.interval = {e.trajectory.front().t, e.trajectory.back().t};
    ta.velocity = snapped(velocities(e.trajectory));
    ta.acceleration = snapped(accelerations(e.trajectory));
    ta.state_sequence = extract_state_sequence(e.trajectory, body.cls, cfg.temporal, &env);
    for (const auto& s : ta.state_sequence) {
      if (!s.state.is(MotionState::Moving) && !s.state.is(MotionState::Walking)) continue;
      auto [it, fresh] = active.emplace(e.id, s.interval);
      if (!fresh) {
        it->second.start = std::min(it->second.start, s.interval.start);
        it->second.end = std::max(it->second.end, s.interval.end);
      }
    }
    if (ta.state_sequence.size() >= 4) ta.periodicity = detect_periodicity(ta.state_sequence, cfg.temporal.period_tolerance);

    if (ego && e.id != d.ego_id) {
      // Elements with declared affordances occlude only when can_occlude is among them.
      auto can_occlude = [&](const std::string& id) {
        auto it = scene.elements.find(id);
        if (it == scene.elements.end() || it->second.affordances.empty()) return true;
        return std::any_of(it->second.affordances.begin(), it->second.affordances.end(),
                           [](const Term<Affordance>& a) { return a.is(Affordance::CanOcclude); });
      };
      std::vector<double> times;
      std::vector<std::pair<Visibility, std::string>> labels;
      for (const auto& s : e.trajectory) {
        if (!covers(*ego, s.t)) continue;
        const Vec2 eye = interpolate(ego->trajectory, s.t).position.head<2>();
        const Footprint target = box_at(e, s.t).fp;
        std::vector<Footprint> occ;
        std::vector<std::pair<std::string, Footprint>> named;
        for (const auto& o : d.elements) {
          if (o.id == e.id || o.id == d.ego_id || !covers(o, s.t) || !can_occlude(o.id)) continue;
          const Footprint fp = box_at(o, s.t).fp;
          const Vec2 l = fp.to_local(eye);
          if (std::abs(l.x()) < fp.half.x() && std::abs(l.y()) < fp.half.y()) continue;
          occ.push_back(fp);
          named.emplace_back(o.id, fp);
        }
        const auto r = occlusion_state(eye, target, occ);
        times.push_back(s.t);
        labels.emplace_back(r.state, r.state == Visibility::Visible ? "" : dominant_occluder(eye, target, named));
      }
      const bool any_hidden = std::any_of(labels.begin(), labels.end(),
                                          [](const auto& l) { return l.first != Visibility::Visible; });
      if (any_hidden && times.size() >= 2) {
        for (const auto& [iv, label] : segment_runs(times, labels)) {
          if (!(iv.start < iv.end)) continue;
          VisibilityInterval v;
          v.interval = iv;
          v.visibility = label.first;
          v.passive = label.first != Visibility::Visible;
          v.cause = label.second;
          ta.visibility.push_back(v);
        }
      }
    }
    d.temporal.push_back(std::move(ta));
  }
  for (auto& ta : d.temporal) {
    auto self = active.find(ta.element_id);
    if (self == active.end()) continue;
    for (const auto& [other, iv] : active) {
      if (other == ta.element_id) continue;
      ta.orderings.push_back({other, order_relation(self->second, iv, cfg.temporal.order_epsilon)});
    }
  }

  // Physical: model assignment, constraints, then violations found by the checker.
  for (const auto& e : d.elements) {
    if (e.trajectory.empty()) continue;
    const Body& body = bodies[e.id];
    const StateEnv env = env_for(e.id);
    const StateSample& last = e.trajectory.back();
    PhysicalAnnotation pa;
    pa.element_id = e.id;
    pa.interval = {e.trajectory.front().t, last.t};
    if (!(pa.interval.start < pa.interval.end)) continue;
    const auto state = classify_state(e.trajectory, body.cls, last.t, cfg.temporal, &env);
    pa.model = to_physical_model(assign_model(body.cls, state, last.yaw_rate, cfg.physics).kind);
    if (const ElementContext* ec = ctx[e.id]) pa.material_tags = ec->materials;

    const bool road_user = body.cls.is(ElementClass::Vehicle) || body.cls.is(ElementClass::PublicTransport) ||
                           body.cls.is(ElementClass::Cyclist) || body.cls.is(ElementClass::Pedestrian);
    if (road_user) {
      const ClassBounds& b = bounds_for(cfg.physics, body.cls);
      pa.constraints.push_back({"max_speed:" + e.id, ConstraintKind::MaxSpeed,
                                {{"limit", Quantity{b.max_speed, Unit::MeterPerSecond}}}});
      pa.constraints.push_back({"max_accel:" + e.id, ConstraintKind::MaxAccel,
                                {{"limit", Quantity{b.max_accel, Unit::MeterPerSecond2}}}});
    }
    if (e.id == d.ego_id) {
      pa.constraints.push_back({"min_gap_rss:" + e.id, ConstraintKind::MinGapRss,
                                {{"lead_range", Quantity{cfg.physics.lead_range, Unit::Meter}}}});
    }
    for (const auto& r : rules) {
      if (std::find(r.yielders.begin(), r.yielders.end(), e.id) == r.yielders.end()) continue;
      pa.constraints.push_back(
          {"traffic_rule:" + r.rule_id + ":" + e.id, ConstraintKind::TrafficRule, {{"rule", r.rule_id}}});
    }
    d.physical.push_back(std::move(pa));
  }
  const auto verdicts = check_constraints(d, cfg);
  for (const auto& v : verdicts) {
    if (v.satisfied || v.inconclusive) continue;
    for (auto& pa : d.physical) {
      if (pa.element_id == v.element_id) pa.violations.push_back({v.constraint_id, v.t_worst, {v.measured, v.unit}});
    }
  }
  return canonicalize(std::move(d));
}

}  // namespace scenu
