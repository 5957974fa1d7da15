#include "scenu/validate.hpp"

#include <Eigen/LU>

#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "scenu/json_io.hpp"

namespace scenu {

using nlohmann::json;

namespace {

constexpr double kTimeTol = 1e-9;
constexpr double kSeqTol = 1e-6;
constexpr double kRotTol = 1e-6;

class Collector {
 public:
  explicit Collector(ValidationReport& r) : r_(r) {}
  void add(std::string code, std::string path, std::string msg) {
    r_.violations.push_back({std::move(code), std::move(path), std::move(msg)});
  }
  void warn(std::string code, std::string path, std::string msg) {
    r_.warnings.push_back({std::move(code), std::move(path), std::move(msg)});
  }

 private:
  ValidationReport& r_;
};

std::string idx(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

bool is_rotation(const Mat3& m) {
  if (!m.allFinite()) return false;
  const Mat3 err = m.transpose() * m - Mat3::Identity();
  return err.cwiseAbs().maxCoeff() <= kRotTol && std::abs(m.determinant() - 1.0) <= kRotTol;
}

template <class E>
void check_term(Collector& c, const Term<E>& t, const std::string& path) {
  if (t.is(E::Other) && t.label().empty()) c.add("VOCAB", path, "other(...) needs a non-empty label");
}

void check_sequence(Collector& c, const Interval& span, const std::vector<Interval>& seq, const std::string& path) {
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto& iv = seq[i];
    if (!(iv.start < iv.end)) c.add("STATE_SEQUENCE", idx(path, i), "interval must have start < end");
    if (iv.start < span.start - kSeqTol || iv.end > span.end + kSeqTol) {
      c.add("STATE_SEQUENCE", idx(path, i), "interval leaves the annotation interval");
    }
    if (i > 0 && std::abs(seq[i - 1].end - iv.start) > kSeqTol) {
      c.add("STATE_SEQUENCE", idx(path, i),
            iv.start < seq[i - 1].end ? "overlaps the previous interval" : "gap after the previous interval");
    }
  }
}

void check_params(Collector& c, const Parameters& p, const std::string& path) {
  for (const auto& [k, v] : p) {
    if (const auto* q = std::get_if<Quantity>(&v); q && !std::isfinite(q->value)) {
      c.add("STRUCTURE", path + "/" + k, "non-finite quantity");
    }
  }
}

void check_constraint_units(Collector& c, const Constraint& con, const std::string& path) {
  auto expect = [&](const char* key, Unit u) {
    auto it = con.params.find(key);
    if (it == con.params.end()) return;
    const auto* q = std::get_if<Quantity>(&it->second);
    if (!q || q->unit != u) {
      c.add("UNIT", path + "/params/" + key, std::string("expected a quantity in ") + std::string(to_string(u)));
    }
  };
  switch (con.kind) {
    case ConstraintKind::MaxSpeed: expect("limit", Unit::MeterPerSecond); break;
    case ConstraintKind::MaxAccel: expect("limit", Unit::MeterPerSecond2); break;
    case ConstraintKind::MinGapRss: expect("lead_range", Unit::Meter); break;
    case ConstraintKind::TrafficRule: break;
  }
}

}  // namespace

bool ValidationReport::has(std::string_view code) const {
  for (const auto& v : violations) {
    if (v.code == code) return true;
  }
  return false;
}

json to_json(const ValidationReport& r) {
  auto list = [](const std::vector<Violation>& vs) {
    json a = json::array();
    for (const auto& v : vs) a.push_back({{"code", v.code}, {"path", v.path}, {"message", v.message}});
    return a;
  };
  return {{"valid", r.ok()}, {"violations", list(r.violations)}, {"warnings", list(r.warnings)}};
}

const std::set<std::string>& identity_keys() {
  static const std::set<std::string> k{"id", "element_id", "t", "interval"};
  return k;
}

const std::set<std::string>& dimension_keys(Dimension d) {
  static const std::set<std::string> sem{"class", "attributes", "state", "affordances"};
  static const std::set<std::string> spat{"position", "orientation", "distance_to_ego", "occupancy", "topology"};
  static const std::set<std::string> temp{"velocity", "acceleration", "state_sequence",
                                          "visibility", "orderings", "periodicity"};
  static const std::set<std::string> phys{"model", "material_tags", "constraints", "violations"};
  switch (d) {
    case Dimension::Semantic: return sem;
    case Dimension::Spatial: return spat;
    case Dimension::Temporal: return temp;
    case Dimension::Physical: return phys;
  }
  return sem;
}

ValidationReport validate_description(const ScenarioDescription& d) {
  ValidationReport report;
  Collector c(report);

  if (!(d.window.start <= d.window.end) || !std::isfinite(d.window.start) || !std::isfinite(d.window.end)) {
    c.add("WINDOW", "/window", "window start must not exceed its end");
  } else if (std::abs(d.window.end) > kTimeTol) {
    c.add("WINDOW", "/window", "window must end at t = 0");
  }

  // Context
  for (const auto& [layer, entries] : d.context.layers) {
    if (layer < 1 || layer > 6) c.add("LAYER_ID", "/context/layers/" + std::to_string(layer), "layer id must be in 1..6");
  }
  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < d.context.rules.size(); ++i) {
      const auto& r = d.context.rules[i];
      if (r.id.empty()) c.add("STRUCTURE", idx("/context/rules", i) + "/id", "rule id is empty");
      if (!seen.insert(r.id).second) c.add("RULE_ID_DUP", idx("/context/rules", i), "duplicate rule id '" + r.id + "'");
      check_params(c, r.params, idx("/context/rules", i) + "/params");
    }
    for (std::size_t i = 1; i < d.context.driver_channel.size(); ++i) {
      if (d.context.driver_channel[i].t < d.context.driver_channel[i - 1].t) {
        c.add("UTTERANCE_ORDER", idx("/context/driver_channel", i), "utterance timestamps must be non-decreasing");
      }
    }
  }

  // Modalities
  for (std::size_t m = 0; m < d.modalities.size(); ++m) {
    const auto& s = d.modalities[m].samples;
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (!(s[i].t > s[i - 1].t)) {
        c.add("MODALITY_TIME", idx(idx("/modalities", m) + "/samples", i), "sample times must strictly increase");
      }
    }
  }

  // Elements
  std::set<std::string> element_ids;
  for (std::size_t i = 0; i < d.elements.size(); ++i) {
    const auto& e = d.elements[i];
    const std::string path = idx("/elements", i);
    if (e.id.empty()) c.add("STRUCTURE", path + "/id", "element id is empty");
    if (!element_ids.insert(e.id).second) c.add("DUPLICATE_ID", path, "duplicate element id '" + e.id + "'");
    for (std::size_t k = 0; k < e.trajectory.size(); ++k) {
      const auto& s = e.trajectory[k];
      const std::string sp = idx(path + "/trajectory", k);
      if (k > 0 && !(s.t > e.trajectory[k - 1].t)) c.add("TRAJ_TIME", sp, "trajectory times must strictly increase");
      if (!is_rotation(s.orientation)) c.add("ORIENTATION", sp + "/orientation", "orientation is not in SO(3)");
      if (!s.position.allFinite() || !std::isfinite(s.speed)) c.add("STRUCTURE", sp, "non-finite state");
    }
  }
  if (!d.ego_id.empty() && !element_ids.count(d.ego_id)) {
    c.add("EGO", "/ego_id", "ego '" + d.ego_id + "' is not an element");
  }

  auto known = [&](const std::string& id) { return element_ids.count(id) > 0; };
  auto in_window = [&](double t) { return t >= d.window.start - kTimeTol && t <= d.window.end + kTimeTol; };

  std::map<std::string, std::string> explicit_ids;
  auto register_id = [&](const std::string& id, const std::string& path) {
    if (id.empty()) return;
    auto [it, fresh] = explicit_ids.emplace(id, path);
    if (!fresh) c.add("DUPLICATE_ID", path, "annotation id '" + id + "' already used at " + it->second);
  };
  std::set<std::tuple<int, std::string, double, double>> slots;
  auto claim = [&](Dimension dim, const std::string& elem, double a, double b, const std::string& path) {
    if (!slots.emplace(static_cast<int>(dim), elem, a, b).second) {
      c.add("DUPLICATE_ANNOTATION", path, "second annotation for '" + elem + "' at the same time");
    }
  };

  for (std::size_t i = 0; i < d.semantic.size(); ++i) {
    const auto& a = d.semantic[i];
    const std::string path = idx("/semantic", i);
    claim(Dimension::Semantic, a.element_id, a.t, a.t, path);
    register_id(a.id, path);
    if (!known(a.element_id)) c.add("UNKNOWN_ELEMENT", path + "/element_id", "no element '" + a.element_id + "'");
    if (!in_window(a.t)) c.add("SNAPSHOT_TIME", path + "/t", "snapshot time outside the window");
    check_term(c, a.class_, path + "/class");
    if (a.state) check_term(c, *a.state, path + "/state");
    for (std::size_t k = 0; k < a.affordances.size(); ++k) check_term(c, a.affordances[k], idx(path + "/affordances", k));
  }

  for (std::size_t i = 0; i < d.spatial.size(); ++i) {
    const auto& a = d.spatial[i];
    const std::string path = idx("/spatial", i);
    claim(Dimension::Spatial, a.element_id, a.t, a.t, path);
    register_id(a.id, path);
    if (!known(a.element_id)) c.add("UNKNOWN_ELEMENT", path + "/element_id", "no element '" + a.element_id + "'");
    if (!in_window(a.t)) c.add("SNAPSHOT_TIME", path + "/t", "snapshot time outside the window");
    if (a.orientation && !is_rotation(*a.orientation)) c.add("ORIENTATION", path + "/orientation", "orientation is not in SO(3)");
    if (a.position && !a.position->allFinite()) c.add("STRUCTURE", path + "/position", "non-finite position");
    if (a.distance_to_ego && !(*a.distance_to_ego >= 0.0)) {
      c.add("NEG_DISTANCE", path + "/distance_to_ego", "distance must be non-negative");
    }
    if (a.occupancy && !(a.occupancy->length > 0 && a.occupancy->width > 0 && a.occupancy->height > 0)) {
      c.add("EXTENT", path + "/occupancy", "extent components must be positive");
    }
    for (std::size_t k = 0; k < a.topology.size(); ++k) {
      const auto& r = a.topology[k];
      const std::string rp = idx(path + "/topology", k);
      check_term(c, r.relation, rp + "/relation");
      if (r.other == a.element_id) c.add("SELF_RELATION", rp, "relation to itself");
      else if (!known(r.other)) c.add("UNKNOWN_ELEMENT", rp + "/other", "no element '" + r.other + "'");
    }
  }

  for (std::size_t i = 0; i < d.temporal.size(); ++i) {
    const auto& a = d.temporal[i];
    const std::string path = idx("/temporal", i);
    claim(Dimension::Temporal, a.element_id, a.interval.start, a.interval.end, path);
    register_id(a.id, path);
    if (!known(a.element_id)) c.add("UNKNOWN_ELEMENT", path + "/element_id", "no element '" + a.element_id + "'");
    if (!(a.interval.start < a.interval.end)) c.add("INTERVAL", path + "/interval", "interval must have start < end");
    if (!in_window(a.interval.start) || !in_window(a.interval.end)) {
      c.add("INTERVAL", path + "/interval", "interval outside the window");
    }
    std::vector<Interval> states, vis;
    for (std::size_t k = 0; k < a.state_sequence.size(); ++k) {
      states.push_back(a.state_sequence[k].interval);
      check_term(c, a.state_sequence[k].state, idx(path + "/state_sequence", k) + "/state");
    }
    for (const auto& v : a.visibility) vis.push_back(v.interval);
    check_sequence(c, a.interval, states, path + "/state_sequence");
    check_sequence(c, a.interval, vis, path + "/visibility");
    for (std::size_t k = 0; k < a.visibility.size(); ++k) {
      const auto& v = a.visibility[k];
      if (!v.cause.empty() && !known(v.cause)) {
        c.add("UNKNOWN_ELEMENT", idx(path + "/visibility", k) + "/cause", "no element '" + v.cause + "'");
      }
    }
    for (std::size_t k = 0; k < a.orderings.size(); ++k) {
      const auto& o = a.orderings[k];
      const std::string op = idx(path + "/orderings", k);
      check_term(c, o.relation, op + "/relation");
      if (o.other == a.element_id) c.add("SELF_RELATION", op, "ordering with itself");
      else if (!known(o.other)) c.add("UNKNOWN_ELEMENT", op + "/other", "no element '" + o.other + "'");
    }
    if (a.periodicity && !(*a.periodicity > 0.0)) c.add("INTERVAL", path + "/periodicity", "period must be positive");
  }

  std::set<std::string> constraint_ids;
  for (std::size_t i = 0; i < d.physical.size(); ++i) {
    const auto& a = d.physical[i];
    const std::string path = idx("/physical", i);
    claim(Dimension::Physical, a.element_id, a.interval.start, a.interval.end, path);
    register_id(a.id, path);
    if (!known(a.element_id)) c.add("UNKNOWN_ELEMENT", path + "/element_id", "no element '" + a.element_id + "'");
    if (!(a.interval.start < a.interval.end)) c.add("INTERVAL", path + "/interval", "interval must have start < end");
    if (!in_window(a.interval.start) || !in_window(a.interval.end)) {
      c.add("INTERVAL", path + "/interval", "interval outside the window");
    }
    check_term(c, a.model, path + "/model");
    std::set<std::string> local;
    for (std::size_t k = 0; k < a.constraints.size(); ++k) {
      const auto& con = a.constraints[k];
      const std::string cp = idx(path + "/constraints", k);
      if (con.id.empty()) c.add("STRUCTURE", cp + "/id", "constraint id is empty");
      if (!constraint_ids.insert(con.id).second) c.add("DUPLICATE_ID", cp, "duplicate constraint id '" + con.id + "'");
      local.insert(con.id);
      check_params(c, con.params, cp + "/params");
      check_constraint_units(c, con, cp);
    }
    for (std::size_t k = 0; k < a.violations.size(); ++k) {
      const auto& v = a.violations[k];
      const std::string vp = idx(path + "/violations", k);
      if (!local.count(v.constraint_id)) c.add("UNKNOWN_REF", vp + "/constraint", "no constraint '" + v.constraint_id + "'");
      if (!a.interval.contains(v.t, kSeqTol)) c.add("INTERVAL", vp + "/t", "violation time outside the interval");
    }
  }
  return report;
}

namespace {

const std::map<std::string, Dimension>& list_dimensions() {
  static const std::map<std::string, Dimension> m{{"semantic", Dimension::Semantic},
                                                  {"spatial", Dimension::Spatial},
                                                  {"temporal", Dimension::Temporal},
                                                  {"physical", Dimension::Physical}};
  return m;
}

bool snapshot_dimension(Dimension d) { return d == Dimension::Semantic || d == Dimension::Spatial; }

void raw_checks(const json& j, Collector& c) {
  static const std::set<std::string> top{"id",       "window",  "context",  "modalities", "elements", "semantic",
                                         "spatial",  "temporal", "physical", "ego_id"};
  for (const auto& [k, v] : j.items()) {
    if (!top.count(k)) c.warn("UNKNOWN_KEY", "/" + k, "unknown top-level key ignored");
  }
  std::map<std::string, std::string> ids;
  for (const auto& [list, dim] : list_dimensions()) {
    auto it = j.find(list);
    if (it == j.end() || !it->is_array()) continue;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& entry = (*it)[i];
      if (!entry.is_object()) continue;
      const std::string path = idx("/" + list, i);
      for (const auto& [k, v] : entry.items()) {
        if (identity_keys().count(k) || dimension_keys(dim).count(k)) continue;
        bool foreign = false;
        for (const auto& [other_list, other] : list_dimensions()) {
          if (other != dim && dimension_keys(other).count(k)) {
            c.add("DIM_PARTITION", path + "/" + k,
                  "key '" + k + "' belongs to the " + other_list + " schema, not " + list);
            foreign = true;
          }
        }
        if (!foreign) c.warn("UNKNOWN_KEY", path + "/" + k, "unknown key ignored");
      }
      if (snapshot_dimension(dim) && entry.contains("interval")) {
        c.add("TIME_KIND", path + "/interval", list + " annotations carry a snapshot time t, not an interval");
      }
      if (!snapshot_dimension(dim) && entry.contains("t")) {
        c.add("TIME_KIND", path + "/t", list + " annotations carry an interval, not a snapshot time");
      }
      if (auto id = entry.find("id"); id != entry.end() && id->is_string() && !id->get<std::string>().empty()) {
        auto [pos, fresh] = ids.emplace(id->get<std::string>(), path);
        if (!fresh) c.add("DIM_PARTITION", path + "/id", "annotation '" + pos->first + "' registered twice");
      }
    }
  }
}

}  // namespace

ValidationReport validate_json(const json& j) {
  ValidationReport report;
  Collector c(report);
  if (!j.is_object()) {
    c.add("STRUCTURE", "/", "scenario file must be a JSON object");
    return report;
  }
  raw_checks(j, c);
  ScenarioDescription d;
  try {
    d = description_from_json(j);
  } catch (const StructureError& e) {
    c.add("STRUCTURE", e.path(), e.what());
    return report;
  }
  ValidationReport typed = validate_description(d);
  for (auto& v : typed.violations) {
    // Duplicate explicit ids across lists are already reported as partition errors.
    bool dup = false;
    if (v.code == "DUPLICATE_ID") {
      for (const auto& r : report.violations) dup = dup || (r.code == "DIM_PARTITION" && r.path == v.path + "/id");
    }
    if (!dup) report.violations.push_back(std::move(v));
  }
  for (auto& w : typed.warnings) report.warnings.push_back(std::move(w));
  return report;
}

ValidationReport validate_document(std::string_view json_text) {
  json j = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (j.is_discarded()) {
    ValidationReport r;
    r.violations.push_back({"STRUCTURE", "/", "not valid JSON"});
    return r;
  }
  return validate_json(j);
}

bool dimension_partition_check(const json& j) {
  // Schema tables must be pairwise disjoint.
  for (const auto& [a, da] : list_dimensions()) {
    for (const auto& [b, db] : list_dimensions()) {
      if (da >= db) continue;
      for (const auto& k : dimension_keys(da)) {
        if (dimension_keys(db).count(k)) return false;
      }
    }
  }
  if (!j.is_object()) return true;
  ValidationReport r;
  Collector c(r);
  raw_checks(j, c);
  return !r.has("DIM_PARTITION");
}

bool dimension_partition_check(const ScenarioDescription& d) {
  return dimension_partition_check(to_json(d));
}

ValidationReport validate_anticipation(const ScenarioAnticipation& a, const ScenarioDescription& base) {
  ValidationReport report;
  Collector c(report);
  if (a.base != base.id) c.add("ANTICIPATION_BASE", "/base", "base '" + a.base + "' does not match '" + base.id + "'");
  if (!(a.horizon > 0.0) || !std::isfinite(a.horizon)) c.add("ANTICIPATION_TIME", "/horizon", "horizon must be positive");
  auto known = [&](const std::string& id) { return base.find_element(id) != nullptr; };
  auto in_horizon = [&](double t) { return t > 0.0 && t <= a.horizon + kTimeTol; };

  for (std::size_t i = 0; i < a.tracks.size(); ++i) {
    const auto& tr = a.tracks[i];
    const std::string path = idx("/tracks", i);
    if (!known(tr.element_id)) c.add("UNKNOWN_ELEMENT", path + "/element_id", "no element '" + tr.element_id + "'");
    for (std::size_t k = 0; k < tr.samples.size(); ++k) {
      const auto& s = tr.samples[k];
      const std::string sp = idx(path + "/samples", k);
      if (!in_horizon(s.t)) c.add("ANTICIPATION_TIME", sp + "/t", "predicted time outside (0, horizon]");
      if (k > 0 && !(s.t > tr.samples[k - 1].t)) c.add("TRAJ_TIME", sp, "times must strictly increase");
      if (!is_rotation(s.orientation)) c.add("ORIENTATION", sp + "/orientation", "orientation is not in SO(3)");
    }
  }
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    const auto& e = a.events[i];
    const std::string path = idx("/events", i);
    if (!in_horizon(e.t)) c.add("ANTICIPATION_TIME", path + "/t", "event time outside (0, horizon]");
    for (const auto& el : e.elements) {
      if (!known(el)) c.add("UNKNOWN_ELEMENT", path + "/elements", "no element '" + el + "'");
    }
  }
  for (std::size_t i = 0; i < a.relations.size(); ++i) {
    const auto& r = a.relations[i];
    const std::string path = idx("/relations", i);
    if (!in_horizon(r.t)) c.add("ANTICIPATION_TIME", path + "/t", "delta time outside (0, horizon]");
    if (!known(r.element_id)) c.add("UNKNOWN_ELEMENT", path + "/element_id", "no element '" + r.element_id + "'");
    if (!known(r.other)) c.add("UNKNOWN_ELEMENT", path + "/other", "no element '" + r.other + "'");
    if (r.element_id == r.other) c.add("SELF_RELATION", path, "relation to itself");
  }
  return report;
}

std::set<std::string> resolvable_refs(const ScenarioDescription& d, const ScenarioAnticipation* a) {
  std::set<std::string> refs;
  for (const auto& x : d.semantic) refs.insert(annotation_ref(x));
  for (const auto& x : d.spatial) refs.insert(annotation_ref(x));
  for (const auto& x : d.temporal) refs.insert(annotation_ref(x));
  for (const auto& x : d.physical) refs.insert(annotation_ref(x));
  for (std::size_t i = 0; i < d.context.driver_channel.size(); ++i) refs.insert("utterance:" + std::to_string(i));
  if (a) {
    for (const auto& e : a->events) refs.insert(event_ref(e));
  }
  return refs;
}

ValidationReport validate_actions(const std::vector<Action>& actions, const ScenarioDescription& d,
                                  const ScenarioAnticipation* a) {
  ValidationReport report;
  Collector c(report);
  const auto refs = resolvable_refs(d, a);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    for (std::size_t k = 0; k < actions[i].justification.size(); ++k) {
      const auto& ref = actions[i].justification[k];
      if (!refs.count(ref)) {
        c.add("UNRESOLVED_REF", idx(idx("/actions", i) + "/justification", k), "'" + ref + "' does not resolve");
      }
    }
  }
  return report;
}

}  // namespace scenu
