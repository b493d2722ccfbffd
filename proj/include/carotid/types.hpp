#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <vector>

namespace carotid {

/// World-space point or direction in millimeters.
using Vec3 = Eigen::Vector3d;
/// In-plane coordinate (u, v) in millimeters relative to a plane center.
using Vec2 = Eigen::Vector2d;

using Polyline3 = std::vector<Vec3>;
using Polyline2 = std::vector<Vec2>;

}  // namespace carotid
