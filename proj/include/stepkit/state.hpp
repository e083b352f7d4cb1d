#pragma once

#include <array>

#include "stepkit/gait.hpp"
#include "stepkit/types.hpp"

namespace stepkit {

inline constexpr double kNominalHeight = 0.48;  // base height over the ground [m]

/// Axis-aligned reach bounds of a foot relative to its hip frame (yaw-aligned,
/// gravity-vertical). Stand-ins for linearised leg kinematics.
struct KinematicBox {
  Vec3 lower = Vec3(-0.25, -0.15, -0.55);
  Vec3 upper = Vec3(0.25, 0.15, -0.25);
};

/// Body-frame hip positions. x forward, y left.
struct HipGeometry {
  std::array<Vec3, 4> offsets = {
      Vec3(0.277, 0.234, 0.0),    // LF
      Vec3(0.277, -0.234, 0.0),   // RF
      Vec3(-0.277, 0.234, 0.0),   // LH
      Vec3(-0.277, -0.234, 0.0),  // RH
  };
  const Vec3& offset(Foot f) const { return offsets[std::size_t(f)]; }
};

struct BasePose {
  Vec3 position = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();  // roll, pitch, yaw [rad]

  Mat3 rotation() const {
    return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
        .toRotationMatrix();
  }
  Mat3 yaw_rotation() const {
    return Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()).toRotationMatrix();
  }
};

struct RobotState {
  BasePose base;
  Vec3 base_velocity = Vec3::Zero();
  std::array<Vec3, 4> foot_positions = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<bool, 4> in_contact = {true, true, true, true};
  double h_ref = kNominalHeight;

  const Vec3& foot(Foot f) const { return foot_positions[std::size_t(f)]; }
  Vec3& foot(Foot f) { return foot_positions[std::size_t(f)]; }

  /// World-space hip position with yaw-only orientation.
  Vec3 hip_position(Foot f, const HipGeometry& hips) const {
    return base.position + base.yaw_rotation() * hips.offset(f);
  }
};

/// Feet placed under the hips at the given ground height.
inline RobotState nominal_state(const Vec3& base_position, double yaw, double ground_z,
                                const HipGeometry& hips = {}) {
  RobotState s;
  s.base.position = base_position;
  s.base.rpy = Vec3(0.0, 0.0, yaw);
  for (Foot f : kAllFeet) {
    Vec3 p = s.hip_position(f, hips);
    p.z() = ground_z;
    s.foot(f) = p;
  }
  return s;
}

}  // namespace stepkit
