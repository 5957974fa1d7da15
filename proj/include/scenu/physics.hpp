#pragma once

// Motion models, prediction, constraint checking and anticipation.

#include <optional>
#include <string>
#include <vector>

#include "scenu/config.hpp"
#include "scenu/geometry.hpp"
#include "scenu/types.hpp"

namespace scenu {

enum class MotionKind { Static, ConstantVelocity, ConstantAcceleration, KinematicBicycle };

struct MotionModel {
  MotionKind kind = MotionKind::Static;
  double wheelbase = 2.7;          // m, bicycle only
  std::optional<double> steering;  // rad; derived from yaw rate when absent
};

Term<PhysicalModel> to_physical_model(MotionKind k);
std::optional<MotionKind> to_motion_kind(const Term<PhysicalModel>& m);

// State a prediction starts from.
struct KinematicState {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  double speed = 0.0;  // signed along the heading
  std::optional<double> yaw_rate;
};

// Last sample of the trajectory; velocity and acceleration by finite
// differences when enough samples exist, otherwise from speed and heading.
KinematicState kinematic_state(const std::vector<StateSample>& traj);

struct Prediction {
  std::vector<StateSample> samples;  // t = start.t + k dt, ..., start.t + horizon
  KinematicState end;
  bool fallback = false;  // bicycle without steering estimate, integrated as constant velocity
};

Prediction predict_from(const KinematicState& start, const MotionModel& model, double horizon, double dt);
Prediction predict(const Element& element, const MotionModel& model, double horizon, double dt);

// Deterministic model assignment from class, state and yaw rate.
MotionModel assign_model(const Term<ElementClass>& cls, const std::optional<Term<MotionState>>& state,
                         std::optional<double> yaw_rate, const PhysicsParams& params);

double rss_longitudinal_safe_distance(double v_rear, double v_front, double rho, double a_max, double b_min,
                                      double b_max);

struct ConstraintVerdict {
  std::string constraint_id;
  std::string element_id;
  ConstraintKind kind = ConstraintKind::MaxSpeed;
  bool satisfied = true;
  bool inconclusive = false;
  double margin = 0.0;  // >= 0 iff satisfied, in `unit`
  Unit unit = Unit::MeterPerSecond;
  double t_worst = 0.0;
  double measured = 0.0;  // value recorded on violation
};

// One verdict per constraint of every physical annotation, in annotation order.
std::vector<ConstraintVerdict> check_constraints(const ScenarioDescription& d, const RunConfig& cfg);

// Latest semantic annotation at or before t (or the earliest one).
const SemanticAnnotation* latest_semantic(const ScenarioDescription& d, const std::string& element_id, double t = 0.0);
const SpatialAnnotation* latest_spatial(const ScenarioDescription& d, const std::string& element_id, double t = 0.0);
Term<ElementClass> class_of(const ScenarioDescription& d, const std::string& element_id);

// Extent of an element and the offset of its box center from the trajectory
// reference point, in the body frame. Taken from the latest spatial
// annotation at or before t; class defaults otherwise.
struct BodyGeometry {
  Extent extent;
  Vec3 offset = Vec3::Zero();
};
BodyGeometry body_geometry(const ScenarioDescription& d, const std::string& element_id, double t, const RunConfig& cfg);
Box element_box(const StateSample& pose, const BodyGeometry& g);

// Predicts every element over (0, horizon] and re-derives topology and
// occlusion at each step. Throws scenu::Error when horizon or dt <= 0.
ScenarioAnticipation anticipate(const ScenarioDescription& d, const RunConfig& cfg);

}  // namespace scenu
