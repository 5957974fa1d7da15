#include "scenu/config.hpp"

#include <cstdio>
#include <sstream>

namespace scenu {

using nlohmann::json;

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.physics.bounds = {
      {"vehicle", {16.7, 8.0}},       {"public_transport", {16.7, 8.0}}, {"pedestrian", {3.0, 3.0}},
      {"cyclist", {8.0, 4.0}},        {"static_object", {2.0, 3.0}},     {"infrastructure", {0.1, 1.0}},
      {"other", {16.7, 8.0}},
  };
  c.physics.wheelbase = {{"vehicle", 2.7}, {"public_transport", 6.0}, {"cyclist", 1.1}, {"other", 2.7}};
  c.physics.default_extent = {
      {"vehicle", {4.6, 1.8, 1.5}},          {"public_transport", {12.0, 2.5, 3.2}},
      {"pedestrian", {0.5, 0.5, 1.75}},      {"cyclist", {1.8, 0.6, 1.7}},
      {"static_object", {0.5, 0.5, 0.5}},    {"infrastructure", {1.0, 1.0, 1.0}},
      {"other", {1.0, 1.0, 1.0}},
  };
  return c;
}

namespace {

std::string class_key(const Term<ElementClass>& cls) {
  return cls.is(ElementClass::Other) ? "other" : std::string(to_string(cls.value()));
}

template <class Map>
const typename Map::mapped_type* lookup_class(const Map& m, const Term<ElementClass>& cls) {
  if (auto it = m.find(class_key(cls)); it != m.end()) return &it->second;
  if (auto it = m.find("other"); it != m.end()) return &it->second;
  return nullptr;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw Error(std::string("config: ") + what + " must be positive");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw Error(std::string("config: bad value for '") + key + "'");
    }
  }
}

}  // namespace

const ClassBounds& bounds_for(const PhysicsParams& p, const Term<ElementClass>& cls) {
  static const ClassBounds kNone{};
  const auto* b = lookup_class(p.bounds, cls);
  return b ? *b : kNone;
}

double wheelbase_for(const PhysicsParams& p, const Term<ElementClass>& cls) {
  const auto* w = lookup_class(p.wheelbase, cls);
  return w ? *w : 2.7;
}

Extent default_extent_for(const PhysicsParams& p, const Term<ElementClass>& cls) {
  const auto* e = lookup_class(p.default_extent, cls);
  return e ? *e : Extent{1.0, 1.0, 1.0};
}

json to_json(const RunConfig& c) {
  json bounds = json::object();
  for (const auto& [k, b] : c.physics.bounds) bounds[k] = {{"max_speed", b.max_speed}, {"max_accel", b.max_accel}};
  json extents = json::object();
  for (const auto& [k, e] : c.physics.default_extent) extents[k] = json::array({e.length, e.width, e.height});
  return {
      {"geometry",
       {{"sector_half_angle_deg", c.geometry.sector_half_angle_deg},
        {"touch_epsilon", c.geometry.touch_epsilon},
        {"near_radius", c.geometry.near_radius}}},
      {"temporal",
       {{"still_speed", c.temporal.still_speed},
        {"park_duration", c.temporal.park_duration},
        {"order_epsilon", c.temporal.order_epsilon},
        {"period_tolerance", c.temporal.period_tolerance}}},
      {"physics",
       {{"rss",
         {{"response_time", c.physics.rss.response_time},
          {"accel_max", c.physics.rss.accel_max},
          {"brake_min", c.physics.rss.brake_min},
          {"brake_max", c.physics.rss.brake_max}}},
        {"bounds", bounds},
        {"wheelbase", c.physics.wheelbase},
        {"default_extent", extents},
        {"yaw_rate_threshold", c.physics.yaw_rate_threshold},
        {"lead_range", c.physics.lead_range}}},
      {"derive", {{"snapshot_interval", c.derive.snapshot_interval}}},
      {"anticipation", {{"horizon", c.anticipation.horizon}, {"dt", c.anticipation.dt}}},
      {"scoring",
       {{"distance_tolerance", c.scoring.distance_tolerance},
        {"time_tolerance", c.scoring.time_tolerance},
        {"match_radius", c.scoring.match_radius},
        {"weights",
         {{"semantic", c.scoring.weights[0]},
          {"spatial", c.scoring.weights[1]},
          {"temporal", c.scoring.weights[2]},
          {"physical", c.scoring.weights[3]}}}}},
      {"decision",
       {{"corridor_length", c.decision.corridor_length}, {"corridor_margin", c.decision.corridor_margin}}},
  };
}

static void reject_unknown(const json& j, const json& known, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string here = path.empty() ? it.key() : path + "." + it.key();
    const auto k = known.find(it.key());
    if (k == known.end()) throw Error("config: unknown setting '" + here + "'");
    if (it->is_object() && k->is_object()) reject_unknown(*it, *k, here);
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig c = RunConfig::defaults();
  if (!j.is_object()) throw Error("config: top level must be an object");
  json known = to_json(c);
  known["config_hash"] = "";  // `config --show` output loads back
  reject_unknown(j, known, "");
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& {
    auto it = j.find(name);
    if (it == j.end()) return empty;
    if (!it->is_object()) throw Error(std::string("config: section '") + name + "' must be an object");
    return *it;
  };

  const json& g = section("geometry");
  read(g, "sector_half_angle_deg", c.geometry.sector_half_angle_deg);
  read(g, "touch_epsilon", c.geometry.touch_epsilon);
  read(g, "near_radius", c.geometry.near_radius);

  const json& t = section("temporal");
  read(t, "still_speed", c.temporal.still_speed);
  read(t, "park_duration", c.temporal.park_duration);
  read(t, "order_epsilon", c.temporal.order_epsilon);
  read(t, "period_tolerance", c.temporal.period_tolerance);

  const json& p = section("physics");
  if (auto it = p.find("rss"); it != p.end() && it->is_object()) {
    read(*it, "response_time", c.physics.rss.response_time);
    read(*it, "accel_max", c.physics.rss.accel_max);
    read(*it, "brake_min", c.physics.rss.brake_min);
    read(*it, "brake_max", c.physics.rss.brake_max);
  }
  if (auto it = p.find("bounds"); it != p.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      ClassBounds b = c.physics.bounds.count(k) ? c.physics.bounds[k] : ClassBounds{};
      read(v, "max_speed", b.max_speed);
      read(v, "max_accel", b.max_accel);
      c.physics.bounds[k] = b;
    }
  }
  if (auto it = p.find("wheelbase"); it != p.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      if (!v.is_number()) throw Error("config: wheelbase values must be numbers");
      c.physics.wheelbase[k] = v.get<double>();
    }
  }
  if (auto it = p.find("default_extent"); it != p.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      if (!v.is_array() || v.size() != 3) throw Error("config: default_extent entries must be [l, w, h]");
      c.physics.default_extent[k] = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    }
  }
  read(p, "yaw_rate_threshold", c.physics.yaw_rate_threshold);
  read(p, "lead_range", c.physics.lead_range);

  read(section("derive"), "snapshot_interval", c.derive.snapshot_interval);

  const json& a = section("anticipation");
  read(a, "horizon", c.anticipation.horizon);
  read(a, "dt", c.anticipation.dt);

  const json& s = section("scoring");
  read(s, "distance_tolerance", c.scoring.distance_tolerance);
  read(s, "time_tolerance", c.scoring.time_tolerance);
  read(s, "match_radius", c.scoring.match_radius);
  if (auto it = s.find("weights"); it != s.end() && it->is_object()) {
    read(*it, "semantic", c.scoring.weights[0]);
    read(*it, "spatial", c.scoring.weights[1]);
    read(*it, "temporal", c.scoring.weights[2]);
    read(*it, "physical", c.scoring.weights[3]);
  }

  const json& d = section("decision");
  read(d, "corridor_length", c.decision.corridor_length);
  read(d, "corridor_margin", c.decision.corridor_margin);

  require_positive(c.geometry.sector_half_angle_deg, "geometry.sector_half_angle_deg");
  if (c.geometry.sector_half_angle_deg >= 90.0) throw Error("config: geometry.sector_half_angle_deg must be < 90");
  require_positive(c.geometry.touch_epsilon, "geometry.touch_epsilon");
  require_positive(c.geometry.near_radius, "geometry.near_radius");
  require_positive(c.temporal.still_speed, "temporal.still_speed");
  require_positive(c.temporal.park_duration, "temporal.park_duration");
  require_positive(c.temporal.order_epsilon, "temporal.order_epsilon");
  require_positive(c.temporal.period_tolerance, "temporal.period_tolerance");
  require_positive(c.physics.rss.response_time, "physics.rss.response_time");
  require_positive(c.physics.rss.accel_max, "physics.rss.accel_max");
  require_positive(c.physics.rss.brake_min, "physics.rss.brake_min");
  require_positive(c.physics.rss.brake_max, "physics.rss.brake_max");
  for (const auto& [k, b] : c.physics.bounds) {
    require_positive(b.max_speed, "physics.bounds.max_speed");
    require_positive(b.max_accel, "physics.bounds.max_accel");
  }
  for (const auto& [k, w] : c.physics.wheelbase) require_positive(w, "physics.wheelbase");
  for (const auto& [k, e] : c.physics.default_extent) {
    require_positive(e.length, "physics.default_extent");
    require_positive(e.width, "physics.default_extent");
    require_positive(e.height, "physics.default_extent");
  }
  require_positive(c.physics.yaw_rate_threshold, "physics.yaw_rate_threshold");
  require_positive(c.physics.lead_range, "physics.lead_range");
  require_positive(c.derive.snapshot_interval, "derive.snapshot_interval");
  require_positive(c.anticipation.horizon, "anticipation.horizon");
  require_positive(c.anticipation.dt, "anticipation.dt");
  require_positive(c.scoring.distance_tolerance, "scoring.distance_tolerance");
  require_positive(c.scoring.time_tolerance, "scoring.time_tolerance");
  require_positive(c.scoring.match_radius, "scoring.match_radius");
  for (double w : c.scoring.weights) require_positive(w, "scoring.weights");
  require_positive(c.decision.corridor_length, "decision.corridor_length");
  require_positive(c.decision.corridor_margin, "decision.corridor_margin");
  return c;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("config override must look like section.key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }

  json j = to_json(cfg);
  json* node = &j;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object()) throw Error("config override: '" + path + "' does not name a setting");
    if (!node->contains(parts[i])) {
      throw Error("config override: unknown " + std::string(i + 1 < parts.size() ? "section" : "setting") + " '" +
                  parts[i] + "'");
    }
    node = &(*node)[parts[i]];
  }
  *node = value;
  cfg = config_from_json(j);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(to_json(cfg).dump())); }

}  // namespace scenu
