#pragma once

// Invariant checks over descriptions, anticipations and action lists.
// Violations are data: nothing here throws on bad input.

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scenu/types.hpp"

namespace scenu {

struct Violation {
  std::string code;
  std::string path;
  std::string message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<Violation> warnings;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const;
  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

nlohmann::json to_json(const ValidationReport& r);

// Field keys owned by each annotation schema. Keys shared by all four
// (id, element_id, t, interval) are identity keys and belong to none.
const std::set<std::string>& dimension_keys(Dimension d);
const std::set<std::string>& identity_keys();

// Typed invariants over an in-memory description.
ValidationReport validate_description(const ScenarioDescription& d);

// Raw-tree checks (dimension partition, time kind, unknown keys) followed by
// decoding and the typed checks. A tree that cannot be decoded yields one
// STRUCTURE violation in addition to any raw-tree findings.
ValidationReport validate_json(const nlohmann::json& j);
ValidationReport validate_document(std::string_view json_text);

// Schema-level disjointness: no key in two schemas, no annotation object
// carrying another dimension's keys, no explicit id registered twice.
bool dimension_partition_check(const nlohmann::json& j);
bool dimension_partition_check(const ScenarioDescription& d);

ValidationReport validate_anticipation(const ScenarioAnticipation& a, const ScenarioDescription& base);

// Every justification must resolve to an annotation ref, an event ref of the
// anticipation (if any) or a driver-channel utterance `utterance:<i>`.
ValidationReport validate_actions(const std::vector<Action>& actions, const ScenarioDescription& d,
                                  const ScenarioAnticipation* a = nullptr);

std::set<std::string> resolvable_refs(const ScenarioDescription& d, const ScenarioAnticipation* a = nullptr);

}  // namespace scenu
