#include "scenu/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace scenu {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

json interval_json(const Interval& i) { return json::array({i.start, i.end}); }

json quantity_json(const Quantity& q) { return {{"value", q.value}, {"unit", std::string(to_string(q.unit))}}; }

json sample_json(const StateSample& s) {
  json j = {{"t", s.t}, {"position", vec_json(s.position)}, {"orientation", mat_json(s.orientation)},
            {"speed", s.speed}};
  if (s.yaw_rate) j["yaw_rate"] = *s.yaw_rate;
  return j;
}

template <class E>
json terms_json(const std::vector<Term<E>>& v) {
  json a = json::array();
  for (const auto& t : v) a.push_back(t.token());
  return a;
}

// Decoder with location tracking. Every failure throws StructureError.
class Reader {
 public:
  Reader(const json& node, std::string path) : node_(&node), path_(std::move(path)) {}

  const json& node() const { return *node_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& msg) const { throw StructureError(path_.empty() ? "/" : path_, msg); }

  Reader at(const char* key) const {
    if (!node_->is_object()) fail("expected object");
    auto it = node_->find(key);
    if (it == node_->end()) fail(std::string("missing key '") + key + "'");
    return Reader(*it, path_ + "/" + key);
  }

  std::optional<Reader> opt(const char* key) const {
    if (!node_->is_object()) fail("expected object");
    auto it = node_->find(key);
    if (it == node_->end() || it->is_null()) return std::nullopt;
    return Reader(*it, path_ + "/" + key);
  }

  double number() const {
    if (!node_->is_number()) fail("expected number");
    double v = node_->get<double>();
    if (!std::isfinite(v)) fail("non-finite number");
    return v;
  }

  std::string str() const {
    if (!node_->is_string()) fail("expected string");
    return node_->get<std::string>();
  }

  bool boolean() const {
    if (!node_->is_boolean()) fail("expected boolean");
    return node_->get<bool>();
  }

  std::vector<Reader> array() const {
    if (!node_->is_array()) fail("expected array");
    std::vector<Reader> out;
    out.reserve(node_->size());
    for (std::size_t i = 0; i < node_->size(); ++i) out.emplace_back((*node_)[i], path_ + "/" + std::to_string(i));
    return out;
  }

  Vec3 vec3() const {
    auto a = array();
    if (a.size() != 3) fail("expected 3 numbers");
    return {a[0].number(), a[1].number(), a[2].number()};
  }

  Mat3 mat3() const {
    auto rows = array();
    if (rows.size() != 3) fail("expected 3x3 matrix");
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      Vec3 row = rows[r].vec3();
      m.row(r) = row.transpose();
    }
    return m;
  }

  Interval interval() const {
    auto a = array();
    if (a.size() != 2) fail("expected [start, end]");
    return {a[0].number(), a[1].number()};
  }

  template <class E>
  Term<E> term() const {
    auto t = Term<E>::parse(str());
    if (!t) fail("unknown vocabulary token '" + str() + "'");
    return *t;
  }

  template <class E>
  E enumv() const {
    auto e = parse_enum<E>(str());
    if (!e) fail("unknown token '" + str() + "'");
    return *e;
  }

  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (const auto& r : array()) out.push_back(r.str());
    return out;
  }

 private:
  const json* node_;
  std::string path_;
};

Quantity read_quantity(const Reader& r) {
  Quantity q;
  q.value = r.at("value").number();
  q.unit = r.at("unit").enumv<Unit>();
  return q;
}

Parameters read_params(const Reader& r) {
  Parameters p;
  if (!r.node().is_object()) r.fail("expected object");
  for (const auto& [k, v] : r.node().items()) {
    Reader item(v, r.path() + "/" + k);
    if (v.is_string()) {
      p[k] = v.get<std::string>();
    } else if (v.is_object()) {
      p[k] = read_quantity(item);
    } else {
      item.fail("parameter must be a string or {value, unit}");
    }
  }
  return p;
}

StateSample read_sample(const Reader& r) {
  StateSample s;
  s.t = r.at("t").number();
  s.position = r.at("position").vec3();
  s.orientation = r.at("orientation").mat3();
  s.speed = r.at("speed").number();
  if (auto y = r.opt("yaw_rate")) s.yaw_rate = y->number();
  return s;
}

template <class E>
std::vector<Term<E>> read_terms(const Reader& r) {
  std::vector<Term<E>> out;
  for (const auto& item : r.array()) out.push_back(item.term<E>());
  return out;
}

}  // namespace

std::string quantity_text(const Quantity& q) { return format_number(q.value) + " " + std::string(to_string(q.unit)); }

json to_json(const Parameters& p) {
  json j = json::object();
  for (const auto& [k, v] : p) {
    if (const auto* q = std::get_if<Quantity>(&v)) {
      j[k] = quantity_json(*q);
    } else {
      j[k] = std::get<std::string>(v);
    }
  }
  return j;
}

json to_json(const Context& c) {
  json layers = json::object();
  for (const auto& [id, entries] : c.layers) {
    json a = json::array();
    for (const auto& e : entries) a.push_back({{"id", e.id}, {"kind", e.kind}, {"label", e.label}});
    layers[std::to_string(id)] = a;
  }
  json rules = json::array();
  for (const auto& r : c.rules) {
    rules.push_back({{"id", r.id}, {"kind", std::string(to_string(r.kind))}, {"params", to_json(r.params)}});
  }
  json driver = json::array();
  for (const auto& u : c.driver_channel) driver.push_back({{"t", u.t}, {"text", u.text}});
  return {{"layers", layers}, {"rules", rules}, {"driver_channel", driver}};
}

json to_json(const ModalityStream& m) {
  json samples = json::array();
  for (const auto& s : m.samples) samples.push_back({{"t", s.t}, {"ref", s.ref}});
  return {{"kind", std::string(to_string(m.kind))}, {"source", m.source}, {"samples", samples}};
}

json to_json(const ScenarioDescription& in) {
  const ScenarioDescription d = canonicalize(in);
  json j;
  j["id"] = d.id;
  j["window"] = interval_json(d.window);
  j["ego_id"] = d.ego_id;
  j["context"] = to_json(d.context);

  j["modalities"] = json::array();
  for (const auto& m : d.modalities) j["modalities"].push_back(to_json(m));

  j["elements"] = json::array();
  for (const auto& e : d.elements) {
    json traj = json::array();
    for (const auto& s : e.trajectory) traj.push_back(sample_json(s));
    j["elements"].push_back({{"id", e.id}, {"trajectory", traj}});
  }

  j["semantic"] = json::array();
  for (const auto& a : d.semantic) {
    json o = {{"element_id", a.element_id},
              {"t", a.t},
              {"class", a.class_.token()},
              {"attributes", a.attributes},
              {"affordances", terms_json(a.affordances)}};
    if (!a.id.empty()) o["id"] = a.id;
    if (a.state) o["state"] = a.state->token();
    j["semantic"].push_back(o);
  }

  j["spatial"] = json::array();
  for (const auto& a : d.spatial) {
    json top = json::array();
    for (const auto& r : a.topology) top.push_back({{"other", r.other}, {"relation", r.relation.token()}});
    json o = {{"element_id", a.element_id}, {"t", a.t}, {"topology", top}};
    if (!a.id.empty()) o["id"] = a.id;
    if (a.position) o["position"] = vec_json(*a.position);
    if (a.orientation) o["orientation"] = mat_json(*a.orientation);
    if (a.distance_to_ego) o["distance_to_ego"] = *a.distance_to_ego;
    if (a.occupancy) o["occupancy"] = json::array({a.occupancy->length, a.occupancy->width, a.occupancy->height});
    j["spatial"].push_back(o);
  }

  j["temporal"] = json::array();
  for (const auto& a : d.temporal) {
    json vel = json::array(), acc = json::array(), seq = json::array(), vis = json::array(), ord = json::array();
    for (const auto& v : a.velocity) vel.push_back({{"t", v.t}, {"v", vec_json(v.value)}});
    for (const auto& v : a.acceleration) acc.push_back({{"t", v.t}, {"a", vec_json(v.value)}});
    for (const auto& s : a.state_sequence) seq.push_back({{"interval", interval_json(s.interval)}, {"state", s.state.token()}});
    for (const auto& v : a.visibility) {
      json o = {{"interval", interval_json(v.interval)},
                {"visibility", std::string(to_string(v.visibility))},
                {"passive", v.passive}};
      if (!v.cause.empty()) o["cause"] = v.cause;
      vis.push_back(o);
    }
    for (const auto& o : a.orderings) ord.push_back({{"other", o.other}, {"relation", o.relation.token()}});
    json o = {{"element_id", a.element_id}, {"interval", interval_json(a.interval)},
              {"velocity", vel},             {"acceleration", acc},
              {"state_sequence", seq},       {"visibility", vis},
              {"orderings", ord},            {"periodicity", nullptr}};
    if (a.periodicity) o["periodicity"] = *a.periodicity;
    if (!a.id.empty()) o["id"] = a.id;
    j["temporal"].push_back(o);
  }

  j["physical"] = json::array();
  for (const auto& a : d.physical) {
    json cons = json::array(), viol = json::array();
    for (const auto& c : a.constraints) {
      cons.push_back({{"id", c.id}, {"kind", std::string(to_string(c.kind))}, {"params", to_json(c.params)}});
    }
    for (const auto& v : a.violations) {
      viol.push_back({{"constraint", v.constraint_id}, {"t", v.t}, {"value", quantity_json(v.measured)}});
    }
    json o = {{"element_id", a.element_id},
              {"interval", interval_json(a.interval)},
              {"model", a.model.token()},
              {"material_tags", a.material_tags},
              {"constraints", cons},
              {"violations", viol}};
    if (!a.id.empty()) o["id"] = a.id;
    j["physical"].push_back(o);
  }
  return j;
}

Context context_from_json(const json& node, const std::string& path) {
  Reader r(node, path);
  Context c;
  if (auto layers = r.opt("layers")) {
    if (!layers->node().is_object()) layers->fail("expected object keyed by layer id");
    for (const auto& [k, v] : layers->node().items()) {
      Reader lr(v, layers->path() + "/" + k);
      int id = 0;
      try {
        std::size_t used = 0;
        id = std::stoi(k, &used);
        if (used != k.size()) lr.fail("layer key must be an integer");
      } catch (const std::logic_error&) {
        lr.fail("layer key must be an integer");
      }
      auto& entries = c.layers[id];
      for (const auto& e : lr.array()) entries.push_back({e.at("id").str(), e.at("kind").str(), e.at("label").str()});
    }
  }
  if (auto rules = r.opt("rules")) {
    for (const auto& rr : rules->array()) {
      Rule rule;
      rule.id = rr.at("id").str();
      rule.kind = rr.at("kind").enumv<RuleKind>();
      if (auto p = rr.opt("params")) rule.params = read_params(*p);
      c.rules.push_back(std::move(rule));
    }
  }
  if (auto drv = r.opt("driver_channel")) {
    for (const auto& u : drv->array()) c.driver_channel.push_back({u.at("t").number(), u.at("text").str()});
  }
  return c;
}

std::vector<ModalityStream> modalities_from_json(const json& node, const std::string& path) {
  std::vector<ModalityStream> out;
  for (const auto& m : Reader(node, path).array()) {
    ModalityStream s;
    s.kind = m.at("kind").enumv<ModalityKind>();
    s.source = m.at("source").str();
    for (const auto& smp : m.at("samples").array()) s.samples.push_back({smp.at("t").number(), smp.at("ref").str()});
    out.push_back(std::move(s));
  }
  return out;
}

ScenarioDescription description_from_json(const json& j) {
  Reader root(j, "");
  if (!j.is_object()) root.fail("scenario file must be a JSON object");
  ScenarioDescription d;
  d.id = root.at("id").str();
  d.window = root.at("window").interval();
  d.ego_id = root.at("ego_id").str();
  if (auto c = root.opt("context")) d.context = context_from_json(c->node(), c->path());
  if (auto m = root.opt("modalities")) d.modalities = modalities_from_json(m->node(), m->path());

  if (auto els = root.opt("elements")) {
    for (const auto& e : els->array()) {
      Element el;
      el.id = e.at("id").str();
      for (const auto& s : e.at("trajectory").array()) el.trajectory.push_back(read_sample(s));
      d.elements.push_back(std::move(el));
    }
  }

  if (auto sem = root.opt("semantic")) {
    for (const auto& a : sem->array()) {
      SemanticAnnotation s;
      if (auto id = a.opt("id")) s.id = id->str();
      s.element_id = a.at("element_id").str();
      s.t = a.at("t").number();
      s.class_ = a.at("class").term<ElementClass>();
      if (auto x = a.opt("attributes")) s.attributes = x->strings();
      if (auto x = a.opt("state")) s.state = x->term<MotionState>();
      if (auto x = a.opt("affordances")) s.affordances = read_terms<Affordance>(*x);
      d.semantic.push_back(std::move(s));
    }
  }

  if (auto spat = root.opt("spatial")) {
    for (const auto& a : spat->array()) {
      SpatialAnnotation s;
      if (auto id = a.opt("id")) s.id = id->str();
      s.element_id = a.at("element_id").str();
      s.t = a.at("t").number();
      if (auto x = a.opt("position")) s.position = x->vec3();
      if (auto x = a.opt("orientation")) s.orientation = x->mat3();
      if (auto x = a.opt("distance_to_ego")) s.distance_to_ego = x->number();
      if (auto x = a.opt("occupancy")) {
        Vec3 e = x->vec3();
        s.occupancy = Extent{e.x(), e.y(), e.z()};
      }
      if (auto x = a.opt("topology")) {
        for (const auto& r : x->array()) s.topology.push_back({r.at("other").str(), r.at("relation").term<Relation>()});
      }
      d.spatial.push_back(std::move(s));
    }
  }

  if (auto temp = root.opt("temporal")) {
    for (const auto& a : temp->array()) {
      TemporalAnnotation s;
      if (auto id = a.opt("id")) s.id = id->str();
      s.element_id = a.at("element_id").str();
      s.interval = a.at("interval").interval();
      if (auto x = a.opt("velocity")) {
        for (const auto& v : x->array()) s.velocity.push_back({v.at("t").number(), v.at("v").vec3()});
      }
      if (auto x = a.opt("acceleration")) {
        for (const auto& v : x->array()) s.acceleration.push_back({v.at("t").number(), v.at("a").vec3()});
      }
      if (auto x = a.opt("state_sequence")) {
        for (const auto& v : x->array()) {
          s.state_sequence.push_back({v.at("interval").interval(), v.at("state").term<MotionState>()});
        }
      }
      if (auto x = a.opt("visibility")) {
        for (const auto& v : x->array()) {
          VisibilityInterval vi;
          vi.interval = v.at("interval").interval();
          vi.visibility = v.at("visibility").enumv<Visibility>();
          if (auto p = v.opt("passive")) vi.passive = p->boolean();
          if (auto c = v.opt("cause")) vi.cause = c->str();
          s.visibility.push_back(std::move(vi));
        }
      }
      if (auto x = a.opt("orderings")) {
        for (const auto& v : x->array()) s.orderings.push_back({v.at("other").str(), v.at("relation").term<Ordering>()});
      }
      if (auto x = a.opt("periodicity")) s.periodicity = x->number();
      d.temporal.push_back(std::move(s));
    }
  }

  if (auto phys = root.opt("physical")) {
    for (const auto& a : phys->array()) {
      PhysicalAnnotation s;
      if (auto id = a.opt("id")) s.id = id->str();
      s.element_id = a.at("element_id").str();
      s.interval = a.at("interval").interval();
      s.model = a.at("model").term<PhysicalModel>();
      if (auto x = a.opt("material_tags")) s.material_tags = x->strings();
      if (auto x = a.opt("constraints")) {
        for (const auto& c : x->array()) {
          Constraint con;
          con.id = c.at("id").str();
          con.kind = c.at("kind").enumv<ConstraintKind>();
          if (auto p = c.opt("params")) con.params = read_params(*p);
          s.constraints.push_back(std::move(con));
        }
      }
      if (auto x = a.opt("violations")) {
        for (const auto& v : x->array()) {
          s.violations.push_back({v.at("constraint").str(), v.at("t").number(), read_quantity(v.at("value"))});
        }
      }
      d.physical.push_back(std::move(s));
    }
  }
  return d;
}

json to_json(const ScenarioAnticipation& in) {
  const ScenarioAnticipation a = canonicalize(in);
  json tracks = json::array();
  for (const auto& t : a.tracks) {
    json samples = json::array();
    for (const auto& s : t.samples) samples.push_back(sample_json(s));
    tracks.push_back({{"element_id", t.element_id}, {"model", t.model.token()}, {"fallback", t.fallback}, {"samples", samples}});
  }
  json events = json::array();
  for (const auto& e : a.events) {
    events.push_back({{"t", e.t}, {"tag", std::string(to_string(e.tag))}, {"elements", e.elements}, {"detail", e.detail}});
  }
  json rels = json::array();
  for (const auto& r : a.relations) {
    rels.push_back({{"t", r.t},
                    {"element_id", r.element_id},
                    {"other", r.other},
                    {"relation", r.relation.token()},
                    {"change", r.added ? "added" : "removed"}});
  }
  return {{"base", a.base}, {"horizon", a.horizon}, {"tracks", tracks}, {"events", events}, {"relations", rels}};
}

ScenarioAnticipation anticipation_from_json(const json& j) {
  Reader root(j, "");
  ScenarioAnticipation a;
  a.base = root.at("base").str();
  a.horizon = root.at("horizon").number();
  if (auto tracks = root.opt("tracks")) {
    for (const auto& t : tracks->array()) {
      PredictedTrack tr;
      tr.element_id = t.at("element_id").str();
      tr.model = t.at("model").term<PhysicalModel>();
      if (auto f = t.opt("fallback")) tr.fallback = f->boolean();
      for (const auto& s : t.at("samples").array()) tr.samples.push_back(read_sample(s));
      a.tracks.push_back(std::move(tr));
    }
  }
  if (auto events = root.opt("events")) {
    for (const auto& e : events->array()) {
      PredictedEvent ev;
      ev.t = e.at("t").number();
      ev.tag = e.at("tag").enumv<EventTag>();
      ev.elements = e.at("elements").strings();
      if (auto x = e.opt("detail")) ev.detail = x->str();
      a.events.push_back(std::move(ev));
    }
  }
  if (auto rels = root.opt("relations")) {
    for (const auto& r : rels->array()) {
      RelationDelta d;
      d.t = r.at("t").number();
      d.element_id = r.at("element_id").str();
      d.other = r.at("other").str();
      d.relation = r.at("relation").term<Relation>();
      const std::string change = r.at("change").str();
      if (change != "added" && change != "removed") r.at("change").fail("expected 'added' or 'removed'");
      d.added = change == "added";
      a.relations.push_back(std::move(d));
    }
  }
  return a;
}

json to_json(const std::vector<Action>& actions) {
  json a = json::array();
  for (const auto& act : actions) {
    a.push_back({{"task", std::string(to_string(act.task))},
                 {"verb", std::string(to_string(act.verb))},
                 {"justification", act.justification}});
  }
  return {{"actions", a}};
}

std::vector<Action> actions_from_json(const json& j) {
  Reader root(j, "");
  std::vector<Action> out;
  for (const auto& a : root.at("actions").array()) {
    Action act;
    act.task = a.at("task").enumv<TaskKind>();
    act.verb = a.at("verb").enumv<ActionVerb>();
    if (auto x = a.opt("justification")) act.justification = x->strings();
    out.push_back(std::move(act));
  }
  return out;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

bool json_approx_equal(const json& a, const json& b, double tol, std::string* where) {
  auto report = [&](const std::string& msg) {
    if (where) *where = msg;
    return false;
  };
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    if (std::abs(x - y) <= tol * (1.0 + std::max(std::abs(x), std::abs(y)))) return true;
    return report("number " + a.dump() + " != " + b.dump());
  }
  if (a.type() != b.type()) return report("type " + a.dump() + " vs " + b.dump());
  if (a.is_array()) {
    if (a.size() != b.size()) return report("array size " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!json_approx_equal(a[i], b[i], tol, where)) {
        if (where) *where = "[" + std::to_string(i) + "]" + *where;
        return false;
      }
    }
    return true;
  }
  if (a.is_object()) {
    if (a.size() != b.size()) return report("object keys differ");
    for (const auto& [k, v] : a.items()) {
      auto it = b.find(k);
      if (it == b.end()) return report("missing key " + k);
      if (!json_approx_equal(v, *it, tol, where)) {
        if (where) *where = "/" + k + *where;
        return false;
      }
    }
    return true;
  }
  return a == b ? true : report(a.dump() + " != " + b.dump());
}

namespace {

template <class T, class Key>
void sort_by(std::vector<T>& v, Key key) {
  std::stable_sort(v.begin(), v.end(), [&](const T& a, const T& b) { return key(a) < key(b); });
}

template <class T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

template <class E>
void sort_unique_terms(std::vector<Term<E>>& v) {
  std::sort(v.begin(), v.end(), [](const Term<E>& a, const Term<E>& b) { return a.token() < b.token(); });
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

ScenarioDescription canonicalize(ScenarioDescription d) {
  for (auto& [id, entries] : d.context.layers) {
    sort_by(entries, [](const LayerEntry& e) { return std::tie(e.id, e.kind, e.label); });
  }
  sort_by(d.context.rules, [](const Rule& r) { return r.id; });
  sort_by(d.context.driver_channel, [](const Utterance& u) { return u.t; });
  for (auto& m : d.modalities) sort_by(m.samples, [](const ModalitySample& s) { return std::tie(s.t, s.ref); });
  sort_by(d.modalities, [](const ModalityStream& m) { return std::make_tuple(static_cast<int>(m.kind), m.source); });
  for (auto& e : d.elements) sort_by(e.trajectory, [](const StateSample& s) { return s.t; });
  sort_by(d.elements, [](const Element& e) { return e.id; });

  for (auto& a : d.semantic) {
    sort_unique(a.attributes);
    sort_unique_terms(a.affordances);
  }
  sort_by(d.semantic, [](const SemanticAnnotation& a) { return std::tie(a.element_id, a.t, a.id); });

  for (auto& a : d.spatial) {
    std::sort(a.topology.begin(), a.topology.end(), [](const TopologyEntry& x, const TopologyEntry& y) {
      return std::make_tuple(x.relation.token(), x.other) < std::make_tuple(y.relation.token(), y.other);
    });
    a.topology.erase(std::unique(a.topology.begin(), a.topology.end()), a.topology.end());
  }
  sort_by(d.spatial, [](const SpatialAnnotation& a) { return std::tie(a.element_id, a.t, a.id); });

  for (auto& a : d.temporal) {
    sort_by(a.velocity, [](const TimedVec& v) { return v.t; });
    sort_by(a.acceleration, [](const TimedVec& v) { return v.t; });
    sort_by(a.state_sequence, [](const StateInterval& s) { return std::tie(s.interval.start, s.interval.end); });
    sort_by(a.visibility, [](const VisibilityInterval& s) { return std::tie(s.interval.start, s.interval.end); });
    std::sort(a.orderings.begin(), a.orderings.end(), [](const OrderingEntry& x, const OrderingEntry& y) {
      return std::make_tuple(x.other, x.relation.token()) < std::make_tuple(y.other, y.relation.token());
    });
    a.orderings.erase(std::unique(a.orderings.begin(), a.orderings.end()), a.orderings.end());
  }
  sort_by(d.temporal, [](const TemporalAnnotation& a) {
    return std::tie(a.element_id, a.interval.start, a.interval.end, a.id);
  });

  for (auto& a : d.physical) {
    sort_unique(a.material_tags);
    sort_by(a.constraints, [](const Constraint& c) { return c.id; });
    sort_by(a.violations, [](const ViolationRecord& v) { return std::tie(v.constraint_id, v.t); });
  }
  sort_by(d.physical, [](const PhysicalAnnotation& a) { return std::tie(a.element_id, a.interval.start, a.id); });
  return d;
}

ScenarioAnticipation canonicalize(ScenarioAnticipation a) {
  for (auto& t : a.tracks) sort_by(t.samples, [](const StateSample& s) { return s.t; });
  sort_by(a.tracks, [](const PredictedTrack& t) { return t.element_id; });
  sort_by(a.events, [](const PredictedEvent& e) {
    return std::make_tuple(e.t, static_cast<int>(e.tag), e.elements, e.detail);
  });
  sort_by(a.relations, [](const RelationDelta& r) {
    return std::make_tuple(r.t, r.element_id, r.other, r.relation.token(), !r.added);
  });
  return a;
}

}  // namespace scenu
