#pragma once

// Ground-truth description function: trajectory log + scene context ->
// scenario description over [t_min, 0].

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenu/config.hpp"
#include "scenu/dsl.hpp"
#include "scenu/types.hpp"

namespace scenu {

// Body enlargement on one side, e.g. an open door.
struct ExtentInflation {
  std::string side = "left";  // left, right, front, rear
  double amount = 0.0;        // m
};

// What a trajectory log cannot carry about an element.
struct ElementContext {
  std::optional<Term<ElementClass>> class_;  // falls back to the log's class hint
  std::optional<Extent> extent;              // nominal body; class default otherwise
  std::optional<ExtentInflation> inflation;
  std::vector<std::string> attributes;
  std::vector<Term<Affordance>> affordances;
  std::vector<std::string> materials;
};

struct SceneContext {
  std::string scenario_id;
  Context context;
  std::vector<ModalityStream> modalities;
  std::map<std::string, ElementContext> elements;
};

SceneContext scene_context_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneContext& c);

// Box center offset (body frame) and extent after inflation.
struct InflatedBody {
  Extent extent;
  Vec3 offset = Vec3::Zero();
};
InflatedBody inflate(const Extent& nominal, const std::optional<ExtentInflation>& inflation);

// Snapshot times 0, -s, -2s, ... inside the window.
std::vector<double> snapshot_times(const Interval& window, double spacing);

// Throws scenu::Error when the log extends past t = 0 or names an ego that
// has no rows.
ScenarioDescription derive_description(const TrajectoryLog& log, const SceneContext& scene, const RunConfig& cfg);

}  // namespace scenu
