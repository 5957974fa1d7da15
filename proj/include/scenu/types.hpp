#pragma once

// Scenario model: context, modalities, elements and the four annotation
// dimensions (semantic, spatial, temporal, physical), plus anticipation,
// tasks and actions.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "scenu/vocab.hpp"

namespace scenu {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Precondition or domain error raised by operations (not by validation,
// which reports violations as data).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Quantity {
  double value = 0.0;
  Unit unit = Unit::Meter;
  friend bool operator==(const Quantity&, const Quantity&) = default;
};

using Param = std::variant<Quantity, std::string>;
using Parameters = std::map<std::string, Param>;

const Quantity* find_quantity(const Parameters& p, const std::string& key);
const std::string* find_text(const Parameters& p, const std::string& key);

struct Interval {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
  bool contains(double t, double tol = 1e-9) const { return t >= start - tol && t <= end + tol; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// (l, w, h) in meters.
struct Extent {
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  friend bool operator==(const Extent&, const Extent&) = default;
};

// ---------------------------------------------------------------------------
// Context (C_6LM, C_r, C_h)

struct LayerEntry {
  std::string id;
  std::string kind;
  std::string label;
};

struct Rule {
  std::string id;
  RuleKind kind = RuleKind::Traffic;
  Parameters params;
};

struct Utterance {
  double t = 0.0;
  std::string text;
};

struct Context {
  std::map<int, std::vector<LayerEntry>> layers;  // 6LM layer id -> entries
  std::vector<Rule> rules;
  std::vector<Utterance> driver_channel;
};

// ---------------------------------------------------------------------------
// Modalities

struct ModalitySample {
  double t = 0.0;
  std::string ref;  // payload reference; `utterance:<i>` points into the driver channel
};

struct ModalityStream {
  ModalityKind kind = ModalityKind::Visual;
  std::string source;
  std::vector<ModalitySample> samples;
};

// ---------------------------------------------------------------------------
// Elements

struct StateSample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
  double speed = 0.0;
  std::optional<double> yaw_rate;
};

struct Element {
  std::string id;
  std::vector<StateSample> trajectory;
};

// ---------------------------------------------------------------------------
// Annotations. `id` is optional; when empty, annotation_ref() derives one.

struct SemanticAnnotation {
  std::string id;
  std::string element_id;
  double t = 0.0;
  Term<ElementClass> class_ = ElementClass::Vehicle;
  std::vector<std::string> attributes;
  std::optional<Term<MotionState>> state;
  std::vector<Term<Affordance>> affordances;
};

struct TopologyEntry {
  std::string other;
  Term<Relation> relation;
  friend bool operator==(const TopologyEntry&, const TopologyEntry&) = default;
  friend auto operator<=>(const TopologyEntry& a, const TopologyEntry& b) {
    if (auto c = a.relation <=> b.relation; c != 0) return c;
    return a.other <=> b.other;
  }
};

struct SpatialAnnotation {
  std::string id;
  std::string element_id;
  double t = 0.0;
  std::optional<Vec3> position;     // bounding-box center
  std::optional<Mat3> orientation;  // SO(3)
  std::optional<double> distance_to_ego;
  std::optional<Extent> occupancy;
  std::vector<TopologyEntry> topology;
};

struct TimedVec {
  double t = 0.0;
  Vec3 value = Vec3::Zero();
};

struct StateInterval {
  Interval interval;
  Term<MotionState> state;
};

struct VisibilityInterval {
  Interval interval;
  Visibility visibility = Visibility::Visible;
  bool passive = false;   // induced by another actor rather than own behaviour
  std::string cause;      // occluder id when passive
};

struct OrderingEntry {
  std::string other;
  Term<Ordering> relation;
  friend bool operator==(const OrderingEntry&, const OrderingEntry&) = default;
};

struct TemporalAnnotation {
  std::string id;
  std::string element_id;
  Interval interval;
  std::vector<TimedVec> velocity;
  std::vector<TimedVec> acceleration;
  std::vector<StateInterval> state_sequence;
  std::vector<VisibilityInterval> visibility;
  std::vector<OrderingEntry> orderings;
  std::optional<double> periodicity;
};

struct Constraint {
  std::string id;
  ConstraintKind kind = ConstraintKind::MaxSpeed;
  Parameters params;
};

struct ViolationRecord {
  std::string constraint_id;
  double t = 0.0;
  Quantity measured;
};

struct PhysicalAnnotation {
  std::string id;
  std::string element_id;
  Interval interval;
  Term<PhysicalModel> model = PhysicalModel::Static;
  std::vector<std::string> material_tags;
  std::vector<Constraint> constraints;
  std::vector<ViolationRecord> violations;
};

// Φ_D over the window [-T_s, 0].
struct ScenarioDescription {
  std::string id;
  Interval window;
  Context context;
  std::vector<ModalityStream> modalities;
  std::vector<Element> elements;
  std::vector<SemanticAnnotation> semantic;
  std::vector<SpatialAnnotation> spatial;
  std::vector<TemporalAnnotation> temporal;
  std::vector<PhysicalAnnotation> physical;
  std::string ego_id;

  const Element* find_element(const std::string& id) const;
};

// ---------------------------------------------------------------------------
// Anticipation (Φ_A over (0, T_e])

struct PredictedTrack {
  std::string element_id;
  Term<PhysicalModel> model = PhysicalModel::Static;
  bool fallback = false;  // bicycle requested but no steering estimate
  std::vector<StateSample> samples;
};

struct PredictedEvent {
  double t = 0.0;
  EventTag tag = EventTag::RelationAdded;
  std::vector<std::string> elements;
  std::string detail;  // relation token or constraint id
};

struct RelationDelta {
  double t = 0.0;
  std::string element_id;
  std::string other;
  Term<Relation> relation;
  bool added = true;
};

struct ScenarioAnticipation {
  std::string base;
  double horizon = 0.0;
  std::vector<PredictedTrack> tracks;
  std::vector<PredictedEvent> events;
  std::vector<RelationDelta> relations;
};

// ---------------------------------------------------------------------------
// Tasks and actions

struct TaskSpec {
  TaskKind kind = TaskKind::Decision;
  Parameters params;
};

struct Action {
  TaskKind task = TaskKind::Decision;
  ActionVerb verb = ActionVerb::Proceed;
  std::vector<std::string> justification;  // annotation refs
  friend bool operator==(const Action&, const Action&) = default;
};

// ---------------------------------------------------------------------------
// Annotation references: `<dim>:<element>[@<t>]` unless an explicit id is set,
// and `event:<tag>:<element>[:<detail>]` for predicted events.

// Six significant digits, no negative zero. Used for all text output.
std::string format_number(double v);
std::string format_time(double t);
std::string annotation_ref(const SemanticAnnotation& a);
std::string annotation_ref(const SpatialAnnotation& a);
std::string annotation_ref(const TemporalAnnotation& a);
std::string annotation_ref(const PhysicalAnnotation& a);
std::string event_ref(const PredictedEvent& e);

// Rotations. Orientation matrices are stored; inputs may carry yaw or
// roll/pitch/yaw (ZYX) angles.
Mat3 rotation_from_yaw(double yaw);
Mat3 rotation_from_rpy(double roll, double pitch, double yaw);
Vec3 rpy_from_rotation(const Mat3& r);
double yaw_of(const Mat3& r);

}  // namespace scenu
