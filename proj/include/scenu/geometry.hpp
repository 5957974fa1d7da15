#pragma once

// Plan-view geometry: oriented footprints, directional relations, surface
// distances, topology derivation and ray-cast occlusion.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "scenu/config.hpp"
#include "scenu/types.hpp"

namespace scenu {

// Oriented rectangle in the ground plane.
struct Footprint {
  Vec2 center = Vec2::Zero();
  Vec2 half = Vec2(0.5, 0.5);  // (l/2, w/2)
  double heading = 0.0;        // rad

  Vec2 axis_u() const;  // unit vector along the length
  Vec2 axis_v() const;  // unit vector along the width (left of u)
  std::array<Vec2, 4> corners() const;
  // Point expressed in the footprint's body frame.
  Vec2 to_local(const Vec2& p) const;
  bool contains(const Vec2& p, double tol = 0.0) const;
};

// Footprint plus vertical extent.
struct Box {
  Footprint fp;
  double z_min = 0.0;
  double z_max = 1.0;
};

// Box centered at `center`, yaw taken from `orientation`.
Box make_box(const Vec3& center, const Mat3& orientation, const Extent& extent);
Footprint make_footprint(const Vec2& center, double heading, double length, double width);

double occupancy_volume(const Extent& e);

// Relations of `target` relative to a reference pose. Returns one of
// front_of/behind/left_of/right_of, or {touching} when the target coincides
// with the reference point in plan view.
std::vector<Relation> classify_directional_relation(const Vec3& ref_position, double ref_heading, const Vec3& target,
                                                    double sector_half_angle_deg = 45.0);

bool footprints_overlap(const Footprint& a, const Footprint& b);
double planar_gap(const Footprint& a, const Footprint& b);
double surface_distance(const Box& a, const Box& b);

// One element at one snapshot time.
struct SceneObject {
  std::string id;
  double t = 0.0;
  Box box;
};

// Topology of every element relative to every other. Directional relations
// use the ego heading anchored at the other element's center; without an
// ego the world x axis is used.
std::map<std::string, std::vector<TopologyEntry>> derive_topology(const std::vector<SceneObject>& snapshot,
                                                                   const std::string& ego_id,
                                                                   const GeometryParams& params);

struct OcclusionResult {
  Visibility state = Visibility::Visible;
  double blocked_fraction = 0.0;
};

// Rays from `viewpoint` to the four corners and center of `target`.
// Throws scenu::Error when the viewpoint lies inside an occluder.
OcclusionResult occlusion_state(const Vec2& viewpoint, const Footprint& target, const std::vector<Footprint>& occluders);

// True when the segment a->b passes through the footprint.
bool segment_hits(const Vec2& a, const Vec2& b, const Footprint& f);

// Pose at time t: linear in position and speed, spherical in orientation.
// Throws scenu::Error outside the trajectory span.
StateSample interpolate(const std::vector<StateSample>& trajectory, double t);

}  // namespace scenu
