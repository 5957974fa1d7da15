#pragma once

// Canonical JSON storage format for descriptions, anticipations and actions.
// Key names are normative (docs/schema.md). Writers canonicalize first, so
// output is independent of in-memory list order.

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scenu/types.hpp"

namespace scenu {

// Malformed structure while decoding; `path` is a JSON-pointer-like location.
class StructureError : public Error {
 public:
  StructureError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

nlohmann::json to_json(const ScenarioDescription& d);
nlohmann::json to_json(const ScenarioAnticipation& a);
nlohmann::json to_json(const std::vector<Action>& actions);
nlohmann::json to_json(const Context& c);
nlohmann::json to_json(const Parameters& p);
nlohmann::json to_json(const ModalityStream& m);

ScenarioDescription description_from_json(const nlohmann::json& j);
ScenarioAnticipation anticipation_from_json(const nlohmann::json& j);
std::vector<Action> actions_from_json(const nlohmann::json& j);
Context context_from_json(const nlohmann::json& j, const std::string& path = "/context");
std::vector<ModalityStream> modalities_from_json(const nlohmann::json& j, const std::string& path = "/modalities");

// Two-space indented dump with a trailing newline.
std::string dump(const nlohmann::json& j);

// Structural equality of two JSON trees; numbers compared with an absolute
// plus relative tolerance.
bool json_approx_equal(const nlohmann::json& a, const nlohmann::json& b, double tol = 1e-9,
                       std::string* where = nullptr);

// Sort and deduplicate every set-like list.
ScenarioDescription canonicalize(ScenarioDescription d);
ScenarioAnticipation canonicalize(ScenarioAnticipation a);

std::string quantity_text(const Quantity& q);

}  // namespace scenu
