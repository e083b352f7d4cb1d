#pragma once

#include "stepkit/qp.hpp"
#include "stepkit/state.hpp"
#include "stepkit/surface.hpp"

namespace stepkit {

struct RaibertParams {
  double stance_time = 0.6;       // T_s [s]
  double height = kNominalHeight; // h [m]
  double gravity = 9.81;          // g [m/s^2]
  Vec2 v_ref = Vec2::Zero();      // commanded planar velocity [m/s]
  double omega_ref = 0.0;         // commanded yaw rate [rad/s]
};

/// Feed-forward footstep target:
///   p* = p_hip + (T_s / 2) v_ref + sqrt(h / g) (v_ref x w),
/// with v_ref lifted to (vx, vy, 0) and w = (0, 0, w_ref).
inline Vec2 raibert_target(const Vec2& hip, const RaibertParams& params) {
  const Vec3 v(params.v_ref.x(), params.v_ref.y(), 0.0);
  const Vec3 w(0.0, 0.0, params.omega_ref);
  const Vec3 cross = v.cross(w);
  const double k = std::sqrt(params.height / params.gravity);
  return hip + 0.5 * params.stance_time * params.v_ref + k * Vec2(cross.x(), cross.y());
}

/// Closest point to the 2D target that lies on the surface and inside the
/// kinematic box anchored at the hip (yaw-aligned frame). The z coordinate
/// comes from the surface plane row.
inline QpSolution optimize_footstep(const Vec2& target, const Surface& surface,
                                    const KinematicBox& box, const Vec3& hip, double yaw) {
  QpProblem qp;
  qp.H = MatX::Zero(3, 3);
  qp.H(0, 0) = 2.0;
  qp.H(1, 1) = 2.0;
  qp.g = VecX::Zero(3);
  qp.g(0) = -2.0 * target.x();
  qp.g(1) = -2.0 * target.y();

  // Pin the point to the supporting plane; the surface rows then bound xy.
  qp.Aeq.resize(1, 3);
  qp.Aeq << surface.plane.a, surface.plane.b, -1.0;
  qp.beq.resize(1);
  qp.beq << -surface.plane.c;

  const Mat3 r = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  const long rows = surface.S.rows() + 6;
  qp.Ain.resize(rows, 3);
  qp.bin.resize(rows);
  qp.Ain.topRows(surface.S.rows()) = surface.S;
  qp.bin.head(surface.s.size()) = surface.s;
  for (int axis = 0; axis < 3; ++axis) {
    const VecX row = r.col(axis);  // e_axis' R^T p = (R e_axis) . p
    qp.Ain.row(surface.S.rows() + 2 * axis) = row.transpose();
    qp.bin(surface.S.rows() + 2 * axis) = row.dot(hip) + box.upper(axis);
    qp.Ain.row(surface.S.rows() + 2 * axis + 1) = -row.transpose();
    qp.bin(surface.S.rows() + 2 * axis + 1) = -(row.dot(hip) + box.lower(axis));
  }
  return solve_qp(qp);
}

}  // namespace stepkit
