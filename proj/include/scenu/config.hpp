#pragma once

// Thresholds and defaults shared by derivation, anticipation, scoring and
// decision. Every value is overridable through the JSON config file or
// `--set section.key=value` on the command line.

#include <array>
#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "scenu/types.hpp"

namespace scenu {

struct GeometryParams {
  double sector_half_angle_deg = 45.0;  // front/behind sector half-angle
  double touch_epsilon = 0.05;          // m
  double near_radius = 10.0;            // m
};

struct TemporalParams {
  double still_speed = 0.1;       // m/s, v_still
  double park_duration = 5.0;     // s, Δ_park
  double order_epsilon = 0.1;     // s, ε_t
  double period_tolerance = 0.1;  // relative duration tolerance
};

struct ClassBounds {
  double max_speed = 0.0;  // m/s
  double max_accel = 0.0;  // m/s^2
};

struct RssParams {
  double response_time = 1.0;  // ρ, s
  double accel_max = 2.0;      // m/s^2
  double brake_min = 4.0;      // m/s^2
  double brake_max = 8.0;      // m/s^2
};

struct PhysicsParams {
  RssParams rss;
  std::map<std::string, ClassBounds> bounds;  // keyed by class token
  std::map<std::string, double> wheelbase;    // m, keyed by class token
  std::map<std::string, Extent> default_extent;
  double yaw_rate_threshold = 1e-3;  // rad/s; below this a vehicle is treated as going straight
  double lead_range = 100.0;         // m, forward reach of the lead-vehicle band
};

struct DeriveParams {
  double snapshot_interval = 2.0;  // s, spacing of semantic/spatial snapshots back from t = 0
};

struct AnticipationParams {
  double horizon = 4.0;  // s, T_e
  double dt = 0.1;       // s
};

struct ScoringParams {
  double distance_tolerance = 0.5;  // m, ε_d
  double time_tolerance = 0.1;      // s, snapshot time matching
  double match_radius = 2.0;        // m, proximity matching
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};  // semantic, spatial, temporal, physical
};

struct DecisionParams {
  double corridor_length = 20.0;  // m ahead of the ego front
  double corridor_margin = 0.5;   // m lateral margin each side
};

struct RunConfig {
  GeometryParams geometry;
  TemporalParams temporal;
  PhysicsParams physics;
  DeriveParams derive;
  AnticipationParams anticipation;
  ScoringParams scoring;
  DecisionParams decision;

  static RunConfig defaults();
};

nlohmann::json to_json(const RunConfig& cfg);
// Missing keys keep their defaults. Throws scenu::Error on non-positive
// thresholds or malformed values.
RunConfig config_from_json(const nlohmann::json& j);

// `section.key=value` or `section.key.sub=value`; value parsed as JSON when
// possible, otherwise as a string.
void apply_override(RunConfig& cfg, const std::string& assignment);

// FNV-1a over the canonical JSON dump; embedded in reports for provenance.
std::string config_hash(const RunConfig& cfg);
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

const ClassBounds& bounds_for(const PhysicsParams& p, const Term<ElementClass>& cls);
double wheelbase_for(const PhysicsParams& p, const Term<ElementClass>& cls);
Extent default_extent_for(const PhysicsParams& p, const Term<ElementClass>& cls);

}  // namespace scenu
