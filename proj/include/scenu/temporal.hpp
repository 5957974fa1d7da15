#pragma once

// Motion-state classification, state sequences, interval ordering,
// periodicity and finite-difference kinematics.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenu/config.hpp"
#include "scenu/types.hpp"

namespace scenu {

// A crossing-priority context rule: while `holder` moves after `since`, the
// listed yielders are expected to hold still.
struct PriorityRule {
  std::string rule_id;
  std::string holder;
  std::vector<std::string> yielders;
  double since = -1e300;
};

// Rules of kind traffic with parameter type=crossing_priority.
std::vector<PriorityRule> priority_rules(const Context& c);

// What classify_state needs to recognise yielding. Trajectories are not owned.
struct StateEnv {
  std::string element_id;
  std::vector<PriorityRule> rules;
  std::map<std::string, const std::vector<StateSample>*> trajectories;
};

double speed_at(const std::vector<StateSample>& traj, double t);
bool is_vehicle_like(const Term<ElementClass>& cls);

// Throws scenu::Error when t lies outside the trajectory span.
Term<MotionState> classify_state(const std::vector<StateSample>& traj, const Term<ElementClass>& cls, double t,
                                 const TemporalParams& params, const StateEnv* env = nullptr);

// Requires at least two samples. Boundaries sit midway between samples whose
// states differ; the result covers [first.t, last.t].
std::vector<StateInterval> extract_state_sequence(const std::vector<StateSample>& traj, const Term<ElementClass>& cls,
                                                  const TemporalParams& params, const StateEnv* env = nullptr);

// Run-length segmentation of labels sampled at strictly increasing times.
template <class L>
std::vector<std::pair<Interval, L>> segment_runs(const std::vector<double>& times, const std::vector<L>& labels) {
  std::vector<std::pair<Interval, L>> out;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!out.empty() && out.back().second == labels[i]) continue;
    const double start = i == 0 ? times.front() : 0.5 * (times[i - 1] + times[i]);
    if (!out.empty()) out.back().first.end = start;
    out.push_back({Interval{start, times.back()}, labels[i]});
  }
  if (!out.empty()) out.back().first.end = times.back();
  return out;
}

Term<Ordering> order_relation(const Interval& a, const Interval& b, double epsilon);

// Smallest period over which the sequence of states repeats with interval
// durations agreeing within `tolerance` (relative). Needs at least 4 intervals.
std::optional<double> detect_periodicity(const std::vector<StateInterval>& seq, double tolerance = 0.1);

// Derivatives on a non-uniform grid: three-point interior stencil and
// second-order one-sided endpoints. Two samples fall back to a difference quotient.
std::vector<TimedVec> differentiate(const std::vector<TimedVec>& series);
std::vector<TimedVec> velocities(const std::vector<StateSample>& traj);
std::vector<TimedVec> accelerations(const std::vector<StateSample>& traj);

}  // namespace scenu
