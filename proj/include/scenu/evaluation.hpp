#pragma once

// Scoring of candidate descriptions and anticipations against ground truth,
// and the task decision function.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scenu/config.hpp"
#include "scenu/types.hpp"

namespace scenu {

struct Matching {
  std::vector<std::pair<std::string, std::string>> pairs;  // (gt id, candidate id), sorted by gt id
  std::vector<std::string> unmatched_gt;
  std::vector<std::string> unmatched_candidate;

  // Candidate id -> gt id for matched pairs.
  std::map<std::string, std::string> to_gt() const;
};

// Exact ids first; the rest greedily by same class and nearest position at
// the latest shared snapshot within `match_radius`. Ties go to the
// lexicographically smaller (gt, candidate) pair.
Matching match_elements(const ScenarioDescription& gt, const ScenarioDescription& cand, const ScoringParams& p);

// One scored item in the drill-down.
struct DrillItem {
  std::string dimension;  // semantic, spatial, temporal, physical, anticipation
  std::string element_id;  // gt id, or candidate id for false positives
  std::string item;
  std::string outcome;  // hit, miss, false_positive
  friend bool operator==(const DrillItem&, const DrillItem&) = default;
};

struct DimensionScore {
  std::string dimension;
  double precision = 1.0;  // 1.0 when nothing is predicted
  double recall = 1.0;     // 1.0 when nothing is expected
  double f1 = 1.0;
  double true_positive = 0.0;  // item count, or seconds for sequence alignment
  double predicted = 0.0;
  double expected = 0.0;
  std::optional<double> mean_abs_error;  // spatial: mean |Δd| in m
};

DimensionScore score_dimension(const ScenarioDescription& gt, const ScenarioDescription& cand, const Matching& m,
                               Dimension dim, const ScoringParams& p, std::vector<DrillItem>* drill = nullptr);
// Throws scenu::Error for a name outside semantic/spatial/temporal/physical.
DimensionScore score_dimension(const ScenarioDescription& gt, const ScenarioDescription& cand, const Matching& m,
                               std::string_view dim, const ScoringParams& p, std::vector<DrillItem>* drill = nullptr);

struct AnticipationScore {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  std::optional<double> event_time_mae;  // s, over matched events
  std::optional<double> ade;             // m
  std::optional<double> fde;             // m
  bool candidate_present = false;
};

struct UnderstandingScore {
  std::array<DimensionScore, 4> dimensions;
  std::optional<AnticipationScore> anticipation;  // present when gt anticipation is given
  double aggregate = 1.0;                         // weighted mean of the four dimension F1s
  Matching matching;
  std::vector<DrillItem> drill_down;
};

UnderstandingScore score_understanding(const ScenarioDescription& gt, const ScenarioAnticipation* gt_anticipation,
                                       const ScenarioDescription& cand, const ScenarioAnticipation* cand_anticipation,
                                       const ScoringParams& p);

// Report encodings. `config_hash` ties a report to the thresholds used.
nlohmann::json to_json(const UnderstandingScore& s, const std::string& scenario, const std::string& candidate,
                       const std::string& config_hash);
std::string csv_header();
std::string csv_rows(const UnderstandingScore& s, const std::string& scenario, const std::string& candidate,
                     const std::string& config_hash);
std::string text_report(const UnderstandingScore& s);

// Conflict corridor ahead of the ego at t = 0.
struct Corridor {
  Vec2 center = Vec2::Zero();
  Vec2 half = Vec2::Zero();
  double heading = 0.0;
};
std::optional<Corridor> ego_corridor(const ScenarioDescription& d, const RunConfig& cfg);

// f_task. Rule priority: yield > proceed_slow > proceed. Interaction adds
// inform_driver; learning and perception record store_observation. Decision
// and interaction tasks need an anticipation (scenu::Error otherwise).
std::vector<Action> decide(const ScenarioDescription& d, const ScenarioAnticipation* a, const TaskSpec& task,
                           const RunConfig& cfg);

}  // namespace scenu
