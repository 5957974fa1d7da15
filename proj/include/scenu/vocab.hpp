#pragma once

// Closed vocabularies used across the scenario model. Open-ended sets
// (classes, states, affordances, relations, orderings, physical models) are
// wrapped in Term<E>, which adds an `other(label)` escape hatch.

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace scenu {

template <class E>
struct EnumNames;

template <class E>
constexpr std::string_view to_string(E e) {
  return EnumNames<E>::names[static_cast<std::size_t>(e)];
}

template <class E>
std::optional<E> parse_enum(std::string_view s) {
  const auto& names = EnumNames<E>::names;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

#define SCENU_ENUM_NAMES(E, ...)                                  \
  template <>                                                     \
  struct EnumNames<E> {                                           \
    static constexpr std::array names = {__VA_ARGS__};            \
  }

using namespace std::string_view_literals;

// 𝒦
enum class ElementClass { Vehicle, Pedestrian, Cyclist, PublicTransport, StaticObject, Infrastructure, Other };
SCENU_ENUM_NAMES(ElementClass, "vehicle"sv, "pedestrian"sv, "cyclist"sv, "public_transport"sv,
                 "static_object"sv, "infrastructure"sv, "other"sv);

// 𝒵 and 𝒮 share one set.
enum class MotionState { Parked, Stopped, Moving, Walking, Yielding, Other };
SCENU_ENUM_NAMES(MotionState, "parked"sv, "stopped"sv, "moving"sv, "walking"sv, "yielding"sv, "other"sv);

// Λ
enum class Affordance { CanOcclude, CanBeRunOver, CanSignal, CanEnterVehicle, CanCross, Other };
SCENU_ENUM_NAMES(Affordance, "can_occlude"sv, "can_be_run_over"sv, "can_signal"sv, "can_enter_vehicle"sv,
                 "can_cross"sv, "other"sv);

// ℛ
enum class Relation { LeftOf, RightOf, FrontOf, Behind, Above, Below, Touching, Contains, ContainedBy, Near, Other };
SCENU_ENUM_NAMES(Relation, "left_of"sv, "right_of"sv, "front_of"sv, "behind"sv, "above"sv, "below"sv,
                 "touching"sv, "contains"sv, "contained_by"sv, "near"sv, "other"sv);

// Π
enum class Ordering { Before, After, Simultaneous, Other };
SCENU_ENUM_NAMES(Ordering, "before"sv, "after"sv, "simultaneous"sv, "other"sv);

enum class PhysicalModel { Static, ConstantVelocity, ConstantAcceleration, KinematicBicycle, RigidBody, HumanBody, Other };
SCENU_ENUM_NAMES(PhysicalModel, "static"sv, "constant_velocity"sv, "constant_acceleration"sv,
                 "kinematic_bicycle"sv, "rigid_body"sv, "human_body"sv, "other"sv);

enum class Visibility { Visible, PartiallyOccluded, Occluded };
SCENU_ENUM_NAMES(Visibility, "visible"sv, "partially_occluded"sv, "occluded"sv);

enum class ModalityKind { Visual, Spatial, Acoustic, Kinematic, Geospatial, Linguistic, Memory };
SCENU_ENUM_NAMES(ModalityKind, "visual"sv, "spatial"sv, "acoustic"sv, "kinematic"sv, "geospatial"sv,
                 "linguistic"sv, "memory"sv);

enum class RuleKind { Traffic, Safety, Value };
SCENU_ENUM_NAMES(RuleKind, "traffic"sv, "safety"sv, "value"sv);

enum class ConstraintKind { MaxSpeed, MaxAccel, MinGapRss, TrafficRule };
SCENU_ENUM_NAMES(ConstraintKind, "max_speed"sv, "max_accel"sv, "min_gap_rss"sv, "traffic_rule"sv);

enum class TaskKind { Perception, Decision, Interaction, Learning };
SCENU_ENUM_NAMES(TaskKind, "perception"sv, "decision"sv, "interaction"sv, "learning"sv);

enum class ActionVerb { Yield, Proceed, ProceedSlow, InformDriver, StoreObservation };
SCENU_ENUM_NAMES(ActionVerb, "yield"sv, "proceed"sv, "proceed_slow"sv, "inform_driver"sv, "store_observation"sv);

enum class EventTag { RelationAdded, RelationRemoved, Occluded, Reappears, ConstraintViolation };
SCENU_ENUM_NAMES(EventTag, "relation_added"sv, "relation_removed"sv, "occluded"sv, "reappears"sv,
                 "constraint_violation"sv);

enum class Dimension { Semantic, Spatial, Temporal, Physical };
SCENU_ENUM_NAMES(Dimension, "semantic"sv, "spatial"sv, "temporal"sv, "physical"sv);

enum class Unit { Second, Meter, MeterPerSecond, MeterPerSecond2, Radian, RadianPerSecond, CubicMeter, Hertz };
SCENU_ENUM_NAMES(Unit, "s"sv, "m"sv, "m/s"sv, "m/s^2"sv, "rad"sv, "rad/s"sv, "m^3"sv, "Hz"sv);

#undef SCENU_ENUM_NAMES

// A vocabulary entry: either a member of the closed set E or `other(label)`.
// E must declare `Other` as an enumerator.
template <class E>
class Term {
 public:
  constexpr Term() = default;
  constexpr Term(E value) : value_(value) {}  // NOLINT(google-explicit-constructor)

  static Term other(std::string label) {
    Term t(E::Other);
    t.label_ = std::move(label);
    return t;
  }

  E value() const { return value_; }
  bool is(E e) const { return value_ == e; }
  const std::string& label() const { return label_; }

  std::string token() const {
    if (value_ == E::Other) return "other(" + label_ + ")";
    return std::string(to_string(value_));
  }

  // Accepts a closed-set name or `other(<label>)` with a non-empty label.
  // The bare word "other" is rejected.
  static std::optional<Term> parse(std::string_view s) {
    constexpr std::string_view prefix = "other(";
    if (s.size() > prefix.size() + 1 && s.substr(0, prefix.size()) == prefix && s.back() == ')') {
      auto label = s.substr(prefix.size(), s.size() - prefix.size() - 1);
      if (label.find_first_of("()\n\r") != std::string_view::npos) return std::nullopt;
      return other(std::string(label));
    }
    auto e = parse_enum<E>(s);
    if (!e || *e == E::Other) return std::nullopt;
    return Term(*e);
  }

  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term& a, const Term& b) {
    if (auto c = a.value_ <=> b.value_; c != 0) return c;
    return a.label_ <=> b.label_;
  }

 private:
  E value_{};
  std::string label_;
};

}  // namespace scenu
