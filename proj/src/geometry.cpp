#include "scenu/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

namespace scenu {

namespace {

constexpr double kCoincident = 1e-9;
constexpr double kAngleTol = 1e-12;

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double s = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

bool separated_on(const Vec2& axis, const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const auto& p : a) {
    const double d = p.dot(axis);
    amin = std::min(amin, d);
    amax = std::max(amax, d);
  }
  for (const auto& p : b) {
    const double d = p.dot(axis);
    bmin = std::min(bmin, d);
    bmax = std::max(bmax, d);
  }
  return amax < bmin || bmax < amin;
}

bool box_inside(const Box& inner, const Box& outer) {
  constexpr double tol = 1e-9;
  for (const auto& c : inner.fp.corners()) {
    if (!outer.fp.contains(c, tol)) return false;
  }
  return inner.z_min >= outer.z_min - tol && inner.z_max <= outer.z_max + tol;
}

}  // namespace

Vec2 Footprint::axis_u() const { return {std::cos(heading), std::sin(heading)}; }
Vec2 Footprint::axis_v() const { return {-std::sin(heading), std::cos(heading)}; }

std::array<Vec2, 4> Footprint::corners() const {
  const Vec2 u = axis_u() * half.x(), v = axis_v() * half.y();
  return {center + u + v, center - u + v, center - u - v, center + u - v};
}

Vec2 Footprint::to_local(const Vec2& p) const {
  const Vec2 d = p - center;
  return {d.dot(axis_u()), d.dot(axis_v())};
}

bool Footprint::contains(const Vec2& p, double tol) const {
  const Vec2 l = to_local(p);
  return std::abs(l.x()) <= half.x() + tol && std::abs(l.y()) <= half.y() + tol;
}

Footprint make_footprint(const Vec2& center, double heading, double length, double width) {
  if (!(length > 0.0) || !(width > 0.0)) throw Error("footprint extents must be positive");
  return {center, Vec2(length / 2.0, width / 2.0), heading};
}

Box make_box(const Vec3& center, const Mat3& orientation, const Extent& extent) {
  if (!(extent.height > 0.0)) throw Error("box height must be positive");
  Box b;
  b.fp = make_footprint(center.head<2>(), yaw_of(orientation), extent.length, extent.width);
  b.z_min = center.z() - extent.height / 2.0;
  b.z_max = center.z() + extent.height / 2.0;
  return b;
}

double occupancy_volume(const Extent& e) {
  if (!(e.length > 0.0) || !(e.width > 0.0) || !(e.height > 0.0)) {
    throw Error("occupancy extent components must be positive");
  }
  return e.length * e.width * e.height;
}

std::vector<Relation> classify_directional_relation(const Vec3& ref_position, double ref_heading, const Vec3& target,
                                                    double sector_half_angle_deg) {
  const Vec2 d = (target - ref_position).head<2>();
  if (d.norm() < kCoincident) return {Relation::Touching};
  const double alpha = sector_half_angle_deg * std::numbers::pi / 180.0;
  const double beta = wrap_angle(std::atan2(d.y(), d.x()) - ref_heading);
  const double mag = std::abs(beta);
  if (mag <= alpha + kAngleTol) return {Relation::FrontOf};
  if (mag >= std::numbers::pi - alpha - kAngleTol) return {Relation::Behind};
  return {beta > 0.0 ? Relation::LeftOf : Relation::RightOf};
}

bool footprints_overlap(const Footprint& a, const Footprint& b) {
  const auto ca = a.corners(), cb = b.corners();
  for (const Vec2& axis : {a.axis_u(), a.axis_v(), b.axis_u(), b.axis_v()}) {
    if (separated_on(axis, ca, cb)) return false;
  }
  return true;
}

double planar_gap(const Footprint& a, const Footprint& b) {
  if (footprints_overlap(a, b)) return 0.0;
  const auto ca = a.corners(), cb = b.corners();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) {
      best = std::min(best, point_segment_distance(ca[i], cb[k], cb[(k + 1) % 4]));
      best = std::min(best, point_segment_distance(cb[i], ca[k], ca[(k + 1) % 4]));
    }
  }
  return best;
}

double surface_distance(const Box& a, const Box& b) {
  const double gxy = planar_gap(a.fp, b.fp);
  const double gz = std::max({0.0, a.z_min - b.z_max, b.z_min - a.z_max});
  return std::hypot(gxy, gz);
}

std::map<std::string, std::vector<TopologyEntry>> derive_topology(const std::vector<SceneObject>& snapshot,
                                                                   const std::string& ego_id,
                                                                   const GeometryParams& params) {
  std::map<std::string, std::vector<TopologyEntry>> out;
  if (snapshot.empty()) return out;
  const double t0 = snapshot.front().t;
  double heading = 0.0;
  for (const auto& o : snapshot) {
    if (std::abs(o.t - t0) > 1e-9) throw Error("derive_topology: snapshot times differ");
    if (o.id == ego_id) heading = o.box.fp.heading;
  }

  for (const auto& a : snapshot) {
    auto& rels = out[a.id];
    for (const auto& b : snapshot) {
      if (a.id == b.id) continue;
      const Vec3 pa(a.box.fp.center.x(), a.box.fp.center.y(), 0.0);
      const Vec3 pb(b.box.fp.center.x(), b.box.fp.center.y(), 0.0);
      for (Relation r : classify_directional_relation(pb, heading, pa, params.sector_half_angle_deg)) {
        rels.push_back({b.id, r});
      }
      const double gap = surface_distance(a.box, b.box);
      if (gap <= params.touch_epsilon) rels.push_back({b.id, Relation::Touching});
      if (gap <= params.near_radius) rels.push_back({b.id, Relation::Near});
      if (box_inside(b.box, a.box)) rels.push_back({b.id, Relation::Contains});
      if (box_inside(a.box, b.box)) rels.push_back({b.id, Relation::ContainedBy});
      if (footprints_overlap(a.box.fp, b.box.fp)) {
        if (a.box.z_min > b.box.z_max) rels.push_back({b.id, Relation::Above});
        if (a.box.z_max < b.box.z_min) rels.push_back({b.id, Relation::Below});
      }
    }
    std::sort(rels.begin(), rels.end());
    rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
  }
  return out;
}

bool segment_hits(const Vec2& a, const Vec2& b, const Footprint& f) {
  // Liang-Barsky clip in the footprint frame.
  const Vec2 p = f.to_local(a), q = f.to_local(b);
  const Vec2 d = q - p;
  double t0 = 0.0, t1 = 1.0;
  for (int axis = 0; axis < 2; ++axis) {
    const double h = f.half[axis];
    if (std::abs(d[axis]) < 1e-15) {
      if (p[axis] < -h || p[axis] > h) return false;
      continue;
    }
    double ta = (-h - p[axis]) / d[axis];
    double tb = (h - p[axis]) / d[axis];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 >= t1) return false;
  }
  return t0 < t1;
}

OcclusionResult occlusion_state(const Vec2& viewpoint, const Footprint& target, const std::vector<Footprint>& occluders) {
  for (const auto& o : occluders) {
    const Vec2 l = o.to_local(viewpoint);
    if (std::abs(l.x()) < o.half.x() && std::abs(l.y()) < o.half.y()) {
      throw Error("occlusion: viewpoint lies inside an occluder");
    }
  }
  std::array<Vec2, 5> samples;
  const auto corners = target.corners();
  std::copy(corners.begin(), corners.end(), samples.begin());
  samples[4] = target.center;

  int blocked = 0;
  for (const auto& s : samples) {
    for (const auto& o : occluders) {
      if (segment_hits(viewpoint, s, o)) {
        ++blocked;
        break;
      }
    }
  }
  OcclusionResult r;
  r.blocked_fraction = blocked / 5.0;
  r.state = blocked == 0 ? Visibility::Visible : blocked == 5 ? Visibility::Occluded : Visibility::PartiallyOccluded;
  return r;
}

StateSample interpolate(const std::vector<StateSample>& trajectory, double t) {
  constexpr double tol = 1e-9;
  if (trajectory.empty()) throw Error("interpolate: empty trajectory");
  if (t < trajectory.front().t - tol || t > trajectory.back().t + tol) {
    throw Error("interpolate: t = " + format_number(t) + " outside the trajectory span");
  }
  auto it = std::lower_bound(trajectory.begin(), trajectory.end(), t,
                             [](const StateSample& s, double v) { return s.t < v; });
  if (it == trajectory.end()) return trajectory.back();
  if (std::abs(it->t - t) <= tol || it == trajectory.begin()) return *it;
  const StateSample& a = *(it - 1);
  const StateSample& b = *it;
  const double s = (t - a.t) / (b.t - a.t);
  StateSample out;
  out.t = t;
  out.position = a.position + s * (b.position - a.position);
  const Eigen::Quaterniond qa(a.orientation), qb(b.orientation);
  out.orientation = qa.slerp(s, qb).toRotationMatrix();
  out.speed = a.speed + s * (b.speed - a.speed);
  if (a.yaw_rate && b.yaw_rate) out.yaw_rate = *a.yaw_rate + s * (*b.yaw_rate - *a.yaw_rate);
  return out;
}

}  // namespace scenu
