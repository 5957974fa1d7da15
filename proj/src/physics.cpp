#include "scenu/physics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "scenu/json_io.hpp"
#include "scenu/temporal.hpp"

namespace scenu {

namespace {

constexpr double kTol = 1e-9;

std::vector<double> step_times(double horizon, double dt) {
  std::vector<double> ts;
  for (int k = 1;; ++k) {
    const double t = std::round(k * dt * 1e9) / 1e9;
    if (t >= horizon - kTol) break;
    ts.push_back(t);
  }
  ts.push_back(horizon);
  return ts;
}

struct BicycleState {
  double x, y, theta, v;
};

BicycleState bicycle_rate(const BicycleState& s, double tan_delta, double wheelbase) {
  return {s.v * std::cos(s.theta), s.v * std::sin(s.theta), s.v * tan_delta / wheelbase, 0.0};
}

BicycleState rk4_step(const BicycleState& s, double h, double tan_delta, double wheelbase) {
  auto add = [](const BicycleState& a, const BicycleState& k, double f) {
    return BicycleState{a.x + f * k.x, a.y + f * k.y, a.theta + f * k.theta, a.v + f * k.v};
  };
  const BicycleState k1 = bicycle_rate(s, tan_delta, wheelbase);
  const BicycleState k2 = bicycle_rate(add(s, k1, h / 2), tan_delta, wheelbase);
  const BicycleState k3 = bicycle_rate(add(s, k2, h / 2), tan_delta, wheelbase);
  const BicycleState k4 = bicycle_rate(add(s, k3, h), tan_delta, wheelbase);
  return {s.x + h / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x), s.y + h / 6 * (k1.y + 2 * k2.y + 2 * k3.y + k4.y),
          s.theta + h / 6 * (k1.theta + 2 * k2.theta + 2 * k3.theta + k4.theta),
          s.v + h / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v)};
}

Vec3 heading_dir(const Mat3& r) { return r.col(0); }

bool is_road_user(const Term<ElementClass>& c) {
  return c.is(ElementClass::Vehicle) || c.is(ElementClass::PublicTransport) || c.is(ElementClass::Cyclist);
}

}  // namespace

Term<PhysicalModel> to_physical_model(MotionKind k) {
  switch (k) {
    case MotionKind::Static: return PhysicalModel::Static;
    case MotionKind::ConstantVelocity: return PhysicalModel::ConstantVelocity;
    case MotionKind::ConstantAcceleration: return PhysicalModel::ConstantAcceleration;
    case MotionKind::KinematicBicycle: return PhysicalModel::KinematicBicycle;
  }
  return PhysicalModel::Static;
}

std::optional<MotionKind> to_motion_kind(const Term<PhysicalModel>& m) {
  switch (m.value()) {
    case PhysicalModel::Static: return MotionKind::Static;
    case PhysicalModel::ConstantVelocity: return MotionKind::ConstantVelocity;
    case PhysicalModel::ConstantAcceleration: return MotionKind::ConstantAcceleration;
    case PhysicalModel::KinematicBicycle: return MotionKind::KinematicBicycle;
    default: return std::nullopt;
  }
}

KinematicState kinematic_state(const std::vector<StateSample>& traj) {
  if (traj.empty()) throw Error("kinematic state of an empty trajectory");
  const StateSample& last = traj.back();
  KinematicState s;
  s.t = last.t;
  s.position = last.position;
  s.orientation = last.orientation;
  s.speed = last.speed;
  s.yaw_rate = last.yaw_rate;
  s.velocity = traj.size() >= 2 ? velocities(traj).back().value : Vec3(last.speed * heading_dir(last.orientation));
  if (traj.size() >= 3) s.acceleration = accelerations(traj).back().value;
  return s;
}

Prediction predict_from(const KinematicState& start, const MotionModel& model, double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw Error("predict: horizon and dt must be positive");
  Prediction out;
  MotionKind kind = model.kind;
  double tan_delta = 0.0;
  if (kind == MotionKind::KinematicBicycle) {
    if (!(model.wheelbase > 0.0)) throw Error("predict: wheelbase must be positive");
    if (model.steering) {
      tan_delta = std::tan(*model.steering);
    } else if (start.yaw_rate && std::abs(start.speed) > 1e-6) {
      tan_delta = *start.yaw_rate * model.wheelbase / start.speed;
    } else {
      kind = MotionKind::ConstantVelocity;
      out.fallback = true;
    }
  }

  const auto times = step_times(horizon, dt);
  out.end = start;
  out.end.t = start.t + horizon;

  if (kind == MotionKind::KinematicBicycle) {
    BicycleState s{start.position.x(), start.position.y(), yaw_of(start.orientation), start.speed};
    double now = 0.0;
    for (double target : times) {
      while (now < target - kTol) {
        const double h = std::min(dt, target - now);
        s = rk4_step(s, h, tan_delta, model.wheelbase);
        now = std::abs(now + h - target) <= kTol ? target : now + h;
      }
      StateSample p;
      p.t = start.t + target;
      p.position = Vec3(s.x, s.y, start.position.z());
      p.orientation = rotation_from_yaw(s.theta);
      p.speed = s.v;
      p.yaw_rate = s.v * tan_delta / model.wheelbase;
      out.samples.push_back(p);
    }
    const auto& last = out.samples.back();
    out.end.position = last.position;
    out.end.orientation = last.orientation;
    out.end.velocity = s.v * heading_dir(last.orientation);
    out.end.acceleration = Vec3::Zero();
    out.end.speed = s.v;
    out.end.yaw_rate = last.yaw_rate;
    return out;
  }

  for (double tau : times) {
    StateSample p;
    p.t = start.t + tau;
    p.orientation = start.orientation;
    switch (kind) {
      case MotionKind::Static:
        p.position = start.position;
        p.speed = 0.0;
        break;
      case MotionKind::ConstantVelocity:
        p.position = start.position + start.velocity * tau;
        p.speed = start.velocity.norm();
        break;
      case MotionKind::ConstantAcceleration:
        p.position = start.position + start.velocity * tau + 0.5 * start.acceleration * tau * tau;
        p.speed = (start.velocity + start.acceleration * tau).norm();
        break;
      case MotionKind::KinematicBicycle: break;
    }
    out.samples.push_back(p);
  }
  out.end.position = out.samples.back().position;
  switch (kind) {
    case MotionKind::Static:
      out.end.velocity = Vec3::Zero();
      out.end.acceleration = Vec3::Zero();
      out.end.speed = 0.0;
      break;
    case MotionKind::ConstantVelocity:
      out.end.acceleration = Vec3::Zero();
      break;
    case MotionKind::ConstantAcceleration:
      out.end.velocity = start.velocity + start.acceleration * horizon;
      out.end.speed = out.end.velocity.norm();
      break;
    case MotionKind::KinematicBicycle: break;
  }
  return out;
}

Prediction predict(const Element& element, const MotionModel& model, double horizon, double dt) {
  return predict_from(kinematic_state(element.trajectory), model, horizon, dt);
}

MotionModel assign_model(const Term<ElementClass>& cls, const std::optional<Term<MotionState>>& state,
                         std::optional<double> yaw_rate, const PhysicsParams& params) {
  MotionModel m;
  const bool moving = state && (state->is(MotionState::Moving) || state->is(MotionState::Walking));
  if (state && state->is(MotionState::Parked)) {
    m.kind = MotionKind::Static;
  } else if ((cls.is(ElementClass::StaticObject) || cls.is(ElementClass::Infrastructure)) && !moving) {
    m.kind = MotionKind::Static;
  } else if (is_road_user(cls) && yaw_rate && std::abs(*yaw_rate) > params.yaw_rate_threshold) {
    m.kind = MotionKind::KinematicBicycle;
    m.wheelbase = wheelbase_for(params, cls);
  } else {
    m.kind = MotionKind::ConstantVelocity;
  }
  return m;
}

double rss_longitudinal_safe_distance(double v_rear, double v_front, double rho, double a_max, double b_min,
                                      double b_max) {
  const double v_reaction = v_rear + rho * a_max;
  const double d = v_rear * rho + 0.5 * a_max * rho * rho + v_reaction * v_reaction / (2.0 * b_min) -
                   v_front * v_front / (2.0 * b_max);
  return std::max(0.0, d);
}

const SemanticAnnotation* latest_semantic(const ScenarioDescription& d, const std::string& element_id, double t) {
  const SemanticAnnotation* best = nullptr;
  const SemanticAnnotation* earliest = nullptr;
  for (const auto& a : d.semantic) {
    if (a.element_id != element_id) continue;
    if (a.t <= t + kTol && (!best || a.t > best->t)) best = &a;
    if (!earliest || a.t < earliest->t) earliest = &a;
  }
  return best ? best : earliest;
}

const SpatialAnnotation* latest_spatial(const ScenarioDescription& d, const std::string& element_id, double t) {
  const SpatialAnnotation* best = nullptr;
  const SpatialAnnotation* earliest = nullptr;
  for (const auto& a : d.spatial) {
    if (a.element_id != element_id) continue;
    if (a.t <= t + kTol && (!best || a.t > best->t)) best = &a;
    if (!earliest || a.t < earliest->t) earliest = &a;
  }
  return best ? best : earliest;
}

Term<ElementClass> class_of(const ScenarioDescription& d, const std::string& element_id) {
  const auto* s = latest_semantic(d, element_id);
  return s ? s->class_ : Term<ElementClass>::other("unknown");
}

BodyGeometry body_geometry(const ScenarioDescription& d, const std::string& element_id, double t,
                           const RunConfig& cfg) {
  BodyGeometry g;
  g.extent = default_extent_for(cfg.physics, class_of(d, element_id));
  const auto* s = latest_spatial(d, element_id, t);
  if (!s) return g;
  if (s->occupancy) g.extent = *s->occupancy;
  const Element* e = d.find_element(element_id);
  if (s->position && e && !e->trajectory.empty() && e->trajectory.front().t <= s->t + kTol &&
      e->trajectory.back().t >= s->t - kTol) {
    const StateSample ref = interpolate(e->trajectory, s->t);
    g.offset = ref.orientation.transpose() * (*s->position - ref.position);
  }
  return g;
}

Box element_box(const StateSample& pose, const BodyGeometry& g) {
  return make_box(pose.position + pose.orientation * g.offset, pose.orientation, g.extent);
}

namespace {

std::vector<const TemporalAnnotation*> temporal_of(const ScenarioDescription& d, const std::string& id) {
  std::vector<const TemporalAnnotation*> out;
  for (const auto& a : d.temporal) {
    if (a.element_id == id) out.push_back(&a);
  }
  return out;
}

ConstraintVerdict check_bound(const ScenarioDescription& d, const PhysicalAnnotation& a, const Constraint& con,
                              const RunConfig& cfg, bool speed) {
  ConstraintVerdict v;
  v.unit = speed ? Unit::MeterPerSecond : Unit::MeterPerSecond2;
  const ClassBounds& b = bounds_for(cfg.physics, class_of(d, a.element_id));
  double limit = speed ? b.max_speed : b.max_accel;
  if (const auto* q = find_quantity(con.params, "limit")) limit = q->value;

  bool any = false;
  double worst = -1.0, t_worst = a.interval.start;
  for (const auto* temp : temporal_of(d, a.element_id)) {
    for (const auto& s : speed ? temp->velocity : temp->acceleration) {
      if (!a.interval.contains(s.t)) continue;
      any = true;
      const double m = s.value.norm();
      if (m > worst + 1e-12) {
        worst = m;
        t_worst = s.t;
      }
    }
  }
  if (!any) {
    v.inconclusive = true;
    return v;
  }
  v.margin = limit - worst;
  v.satisfied = v.margin >= 0.0;
  v.t_worst = t_worst;
  v.measured = worst;
  return v;
}

ConstraintVerdict check_rss(const ScenarioDescription& d, const PhysicalAnnotation& a, const Constraint& con,
                            const RunConfig& cfg) {
  ConstraintVerdict v;
  v.unit = Unit::Meter;
  const Element* ego = d.find_element(a.element_id);
  if (!ego || ego->trajectory.empty()) {
    v.inconclusive = true;
    return v;
  }
  double range = cfg.physics.lead_range;
  if (const auto* q = find_quantity(con.params, "lead_range")) range = q->value;
  const auto& rss = cfg.physics.rss;

  v.margin = range;
  v.measured = range;
  v.t_worst = std::max(a.interval.start, ego->trajectory.front().t);
  for (const auto& es : ego->trajectory) {
    if (!a.interval.contains(es.t)) continue;
    const Box ego_box = element_box(es, body_geometry(d, ego->id, es.t, cfg));
    const Vec2 fwd = ego_box.fp.axis_u();
    const Vec2 front = ego_box.fp.center + fwd * ego_box.fp.half.x();
    const Footprint band{front + fwd * (range / 2.0), Vec2(range / 2.0, ego_box.fp.half.y()), ego_box.fp.heading};
    for (const auto& other : d.elements) {
      if (other.id == ego->id || other.trajectory.empty()) continue;
      if (!is_road_user(class_of(d, other.id))) continue;
      if (es.t < other.trajectory.front().t - kTol || es.t > other.trajectory.back().t + kTol) continue;
      const StateSample os = interpolate(other.trajectory, es.t);
      const Box lead = element_box(os, body_geometry(d, other.id, es.t, cfg));
      if ((lead.fp.center - ego_box.fp.center).dot(fwd) <= 0.0) continue;
      if (!footprints_overlap(lead.fp, band)) continue;
      const double gap = planar_gap(ego_box.fp, lead.fp);
      const double v_front = std::max(0.0, os.speed * heading_dir(os.orientation).head<2>().dot(fwd));
      const double need = rss_longitudinal_safe_distance(std::max(0.0, es.speed), v_front, rss.response_time,
                                                         rss.accel_max, rss.brake_min, rss.brake_max);
      if (gap - need < v.margin) {
        v.margin = gap - need;
        v.measured = gap;
        v.t_worst = es.t;
      }
    }
  }
  v.satisfied = v.margin >= 0.0;
  return v;
}

ConstraintVerdict check_rule(const ScenarioDescription& d, const PhysicalAnnotation& a, const Constraint& con,
                             const RunConfig& cfg) {
  ConstraintVerdict v;
  v.unit = Unit::MeterPerSecond;
  const std::string* rule_id = find_text(con.params, "rule");
  const PriorityRule* rule = nullptr;
  const auto rules = priority_rules(d.context);
  for (const auto& r : rules) {
    if (rule_id && r.rule_id == *rule_id) rule = &r;
  }
  const Element* yielder = d.find_element(a.element_id);
  const Element* holder = rule ? d.find_element(rule->holder) : nullptr;
  if (!rule || !yielder || !holder || yielder->trajectory.empty() || holder->trajectory.empty()) {
    v.inconclusive = true;
    return v;
  }
  const double v_still = cfg.temporal.still_speed;
  v.margin = v_still;
  v.t_worst = std::max(rule->since, a.interval.start);
  for (const auto& s : yielder->trajectory) {
    if (!a.interval.contains(s.t) || s.t < rule->since - kTol) continue;
    if (s.t < holder->trajectory.front().t - kTol || s.t > holder->trajectory.back().t + kTol) continue;
    if (speed_at(holder->trajectory, s.t) < v_still) continue;
    const double m = v_still - std::abs(s.speed);
    if (m < v.margin) {
      v.margin = m;
      v.t_worst = s.t;
      v.measured = std::abs(s.speed);
    }
  }
  v.satisfied = v.margin >= 0.0;
  return v;
}

}  // namespace

std::vector<ConstraintVerdict> check_constraints(const ScenarioDescription& d, const RunConfig& cfg) {
  std::vector<ConstraintVerdict> out;
  for (const auto& a : d.physical) {
    for (const auto& con : a.constraints) {
      ConstraintVerdict v;
      switch (con.kind) {
        case ConstraintKind::MaxSpeed: v = check_bound(d, a, con, cfg, true); break;
        case ConstraintKind::MaxAccel: v = check_bound(d, a, con, cfg, false); break;
        case ConstraintKind::MinGapRss: v = check_rss(d, a, con, cfg); break;
        case ConstraintKind::TrafficRule: v = check_rule(d, a, con, cfg); break;
      }
      v.constraint_id = con.id;
      v.element_id = a.element_id;
      v.kind = con.kind;
      out.push_back(v);
    }
  }
  return out;
}

namespace {

using RelationSet = std::set<std::tuple<std::string, std::string, Term<Relation>>>;

RelationSet flatten(const std::map<std::string, std::vector<TopologyEntry>>& topo) {
  RelationSet s;
  for (const auto& [a, rels] : topo) {
    for (const auto& r : rels) s.emplace(a, r.other, r.relation);
  }
  return s;
}

}  // namespace

ScenarioAnticipation anticipate(const ScenarioDescription& d, const RunConfig& cfg) {
  const double horizon = cfg.anticipation.horizon, dt = cfg.anticipation.dt;
  if (!(horizon > 0.0)) throw Error("anticipate: horizon must be positive");
  if (!(dt > 0.0)) throw Error("anticipate: dt must be positive");

  ScenarioAnticipation out;
  out.base = d.id;
  out.horizon = horizon;

  struct Tracked {
    const Element* element;
    BodyGeometry geometry;
    StateSample now;
    bool occludes = true;
  };
  std::vector<Tracked> tracked;
  for (const auto& e : d.elements) {
    if (e.trajectory.empty()) continue;
    KinematicState start = kinematic_state(e.trajectory);
    start.t = 0.0;
    const auto* sem = latest_semantic(d, e.id);
    // Same rule as derivation: declared affordances without can_occlude mean the element never blocks a view.
    const bool occludes = !sem || sem->affordances.empty() ||
                          std::any_of(sem->affordances.begin(), sem->affordances.end(),
                                      [](const Term<Affordance>& a) { return a.is(Affordance::CanOcclude); });
    const Term<ElementClass> cls = sem ? sem->class_ : Term<ElementClass>::other("unknown");
    const std::optional<Term<MotionState>> state = sem ? sem->state : std::nullopt;
    const MotionModel model = assign_model(cls, state, start.yaw_rate, cfg.physics);
    const Prediction p = predict_from(start, model, horizon, dt);
    out.tracks.push_back({e.id, to_physical_model(model.kind), p.fallback, p.samples});

    StateSample now = e.trajectory.back();
    now.t = 0.0;
    tracked.push_back({&e, body_geometry(d, e.id, 0.0, cfg), now, occludes});
  }
  if (out.tracks.empty()) return out;

  const auto& times = out.tracks.front().samples;
  const bool has_ego = !d.ego_id.empty() && d.find_element(d.ego_id) && !d.find_element(d.ego_id)->trajectory.empty();

  auto boxes_at = [&](int k) {
    std::vector<SceneObject> objs;
    for (std::size_t i = 0; i < tracked.size(); ++i) {
      const StateSample& pose = k < 0 ? tracked[i].now : out.tracks[i].samples[k];
      objs.push_back({tracked[i].element->id, k < 0 ? 0.0 : times[k].t, element_box(pose, tracked[i].geometry)});
    }
    return objs;
  };

  auto visibility_at = [&](const std::vector<SceneObject>& objs) {
    std::map<std::string, std::optional<Visibility>> vis;
    if (!has_ego) return vis;
    Vec2 viewpoint = Vec2::Zero();
    for (const auto& o : objs) {
      if (o.id == d.ego_id) viewpoint = o.box.fp.center;
    }
    for (const auto& target : objs) {
      if (target.id == d.ego_id) continue;
      std::vector<Footprint> occluders;
      for (std::size_t i = 0; i < objs.size(); ++i) {
        const auto& o = objs[i];
        if (o.id != d.ego_id && o.id != target.id && tracked[i].occludes) occluders.push_back(o.box.fp);
      }
      try {
        vis[target.id] = occlusion_state(viewpoint, target.box.fp, occluders).state;
      } catch (const Error&) {
        vis[target.id] = std::nullopt;
      }
    }
    return vis;
  };

  auto objs = boxes_at(-1);
  RelationSet prev_rel = flatten(derive_topology(objs, d.ego_id, cfg.geometry));
  auto prev_vis = visibility_at(objs);

  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k].t;
    objs = boxes_at(static_cast<int>(k));
    RelationSet rel = flatten(derive_topology(objs, d.ego_id, cfg.geometry));
    auto emit_delta = [&](const auto& entry, bool added) {
      const auto& [a, b, r] = entry;
      out.relations.push_back({t, a, b, r, added});
      const bool mirrored = b == d.ego_id && (r.is(Relation::Near) || r.is(Relation::Touching));
      if ((a == d.ego_id || b == d.ego_id) && !mirrored) {
        out.events.push_back({t, added ? EventTag::RelationAdded : EventTag::RelationRemoved, {a, b}, r.token()});
      }
    };
    for (const auto& e : rel) {
      if (!prev_rel.count(e)) emit_delta(e, true);
    }
    for (const auto& e : prev_rel) {
      if (!rel.count(e)) emit_delta(e, false);
    }
    prev_rel = std::move(rel);

    auto vis = visibility_at(objs);
    for (const auto& [id, v] : vis) {
      auto it = prev_vis.find(id);
      if (!v || it == prev_vis.end() || !it->second) continue;
      const bool was_full = *it->second == Visibility::Occluded;
      const bool is_full = *v == Visibility::Occluded;
      if (!was_full && is_full) out.events.push_back({t, EventTag::Occluded, {id}, ""});
      if (was_full && !is_full) out.events.push_back({t, EventTag::Reappears, {id}, ""});
    }
    for (auto& [id, v] : vis) {
      if (v) prev_vis[id] = v;
    }
  }

  // Constraint checks over the predicted timeline.
  ScenarioDescription future;
  future.id = d.id;
  future.ego_id = d.ego_id;
  future.context = d.context;
  future.window = {0.0, horizon};
  future.semantic = d.semantic;
  future.spatial = d.spatial;
  for (std::size_t i = 0; i < tracked.size(); ++i) {
    Element e;
    e.id = tracked[i].element->id;
    e.trajectory.push_back(tracked[i].now);
    for (const auto& s : out.tracks[i].samples) e.trajectory.push_back(s);
    TemporalAnnotation temp;
    temp.element_id = e.id;
    temp.interval = {0.0, horizon};
    temp.velocity = velocities(e.trajectory);
    temp.acceleration = accelerations(e.trajectory);
    future.temporal.push_back(std::move(temp));
    future.elements.push_back(std::move(e));
  }
  for (const auto& a : d.physical) {
    PhysicalAnnotation p = a;
    p.interval = {0.0, horizon};
    p.violations.clear();
    future.physical.push_back(std::move(p));
  }
  for (const auto& v : check_constraints(future, cfg)) {
    if (v.satisfied || v.inconclusive || v.t_worst <= kTol) continue;
    out.events.push_back({v.t_worst, EventTag::ConstraintViolation, {v.element_id}, v.constraint_id});
  }

  return canonicalize(std::move(out));
}

}  // namespace scenu
