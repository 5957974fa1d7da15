#include "scenu/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Geometry>

namespace scenu {

const Quantity* find_quantity(const Parameters& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) return nullptr;
  return std::get_if<Quantity>(&it->second);
}

const std::string* find_text(const Parameters& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) return nullptr;
  return std::get_if<std::string>(&it->second);
}

const Element* ScenarioDescription::find_element(const std::string& eid) const {
  for (const auto& e : elements) {
    if (e.id == eid) return &e;
  }
  return nullptr;
}

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

std::string format_time(double t) { return format_number(t); }

std::string annotation_ref(const SemanticAnnotation& a) {
  return a.id.empty() ? "sem:" + a.element_id + "@" + format_time(a.t) : a.id;
}

std::string annotation_ref(const SpatialAnnotation& a) {
  return a.id.empty() ? "spat:" + a.element_id + "@" + format_time(a.t) : a.id;
}

std::string annotation_ref(const TemporalAnnotation& a) {
  return a.id.empty() ? "temp:" + a.element_id : a.id;
}

std::string annotation_ref(const PhysicalAnnotation& a) {
  return a.id.empty() ? "phys:" + a.element_id : a.id;
}

std::string event_ref(const PredictedEvent& e) {
  std::string ref = "event:" + std::string(to_string(e.tag)) + ":" + (e.elements.empty() ? "" : e.elements.front());
  if (!e.detail.empty()) ref += ":" + e.detail;
  return ref;
}

Mat3 rotation_from_yaw(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 rotation_from_rpy(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 rpy_from_rotation(const Mat3& r) {
  // ZYX convention; gimbal lock resolved with roll = 0.
  const double sp = std::clamp(-r(2, 0), -1.0, 1.0);
  const double pitch = std::asin(sp);
  if (std::abs(sp) > 1.0 - 1e-12) {
    return {0.0, pitch, std::atan2(-r(0, 1), r(1, 1))};
  }
  return {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
}

double yaw_of(const Mat3& r) { return std::atan2(r(1, 0), r(0, 0)); }

}  // namespace scenu
