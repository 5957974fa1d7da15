#pragma once

// Line-oriented annotation language (grammar in docs/dsl.md) and the
// trajectory-log format. Parsers are total: any input yields either a value
// or a list of positioned errors.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scenu/types.hpp"

namespace scenu {

struct Diagnostic {
  int line = 1;    // 1-based
  int column = 1;  // 1-based byte column
  std::string message;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

std::string to_string(const Diagnostic& d);

// What a document can carry besides the description.
struct Candidate {
  ScenarioDescription description;
  std::optional<ScenarioAnticipation> anticipation;
  std::vector<Action> actions;
  std::vector<Diagnostic> warnings;  // unknown keys; never scored
};

struct ParseResult {
  std::optional<Candidate> value;
  std::vector<Diagnostic> errors;
  bool ok() const { return value.has_value(); }
};

ParseResult parse_annotation_text(std::string_view text);

// Canonical document: fixed block order, sorted lists, six significant
// digits, orientations as ZYX roll/pitch/yaw.
std::string serialize(const ScenarioDescription& d, const ScenarioAnticipation* a = nullptr,
                      const std::vector<Action>* actions = nullptr);

struct TrajectoryRow {
  double t = 0.0;
  std::string id;
  std::string class_hint;
  double x = 0.0, y = 0.0, z = 0.0;
  double yaw = 0.0;
  double speed = 0.0;
};

struct TrajectoryLog {
  std::string ego_id;
  double rate = 0.0;  // Hz
  std::vector<TrajectoryRow> rows;  // sorted by (t, id)

  // One element per id; yaw becomes a rotation matrix and the yaw rate is
  // differentiated from the unwrapped yaw.
  std::vector<Element> elements() const;
  std::map<std::string, std::string> class_hints() const;
};

struct LogParseResult {
  std::optional<TrajectoryLog> value;
  std::vector<Diagnostic> errors;
  bool ok() const { return value.has_value(); }
};

LogParseResult parse_trajectory_log(std::string_view text);
std::string serialize_log(const TrajectoryLog& log);

}  // namespace scenu
