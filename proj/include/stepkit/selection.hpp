#pragma once

#include "stepkit/footstep.hpp"
#include "stepkit/gait.hpp"
#include "stepkit/miqp.hpp"
#include "stepkit/state.hpp"
#include "stepkit/terrain.hpp"

namespace stepkit {

/// Base configuration extrapolated to a future contact phase.
struct ExtrapolatedConfig {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
  PlaneCoeffs local_plane;  // terrain fit used for z / roll / pitch
};

struct SelectionConfig {
  double w1 = 1.0;            // footstep regularization weight
  double w2 = 0.5;            // hip distance weight
  double big_m = 100.0;
  double timeout_s = 0.25;
  Vec2 fit_extent = Vec2(0.6, 0.6);  // window of the local terrain fit [m]
  int fit_resolution = 10;           // samples per axis
};

/// Closed-form constant-twist arc: body-frame velocity (vx, vy) and yaw rate
/// integrated from (x0, y0, yaw0) over t.
inline Vec2 integrate_arc(const Vec2& start, double yaw0, double vx, double vy, double yaw_rate,
                          double t) {
  if (std::abs(yaw_rate) < 1e-6) {
    // Series limit, keeping the first curvature term.
    const double c = std::cos(yaw0), s = std::sin(yaw0);
    const double dx = vx * t - 0.5 * yaw_rate * t * t * vy;
    const double dy = vy * t + 0.5 * yaw_rate * t * t * vx;
    return start + Vec2(c * dx - s * dy, s * dx + c * dy);
  }
  const double yaw1 = yaw0 + yaw_rate * t;
  const double ds = std::sin(yaw1) - std::sin(yaw0);
  const double dc = std::cos(yaw1) - std::cos(yaw0);
  return start + Vec2(vx * ds + vy * dc, -vx * dc + vy * ds) / yaw_rate;
}

/// Extrapolate one 6D configuration per contact phase of the horizon: xy from
/// the commanded twist, z and roll/pitch from a least-squares plane fit of the
/// terrain around the extrapolated position, yaw integrated directly.
inline std::vector<ExtrapolatedConfig> extrapolate_configs(
    const RobotState& state, const Vec2& v_ref, double yaw_rate, const GaitPattern& gait,
    const ElevationSource& terrain, const SelectionConfig& cfg = {}, int first_phase = 0) {
  const int phases = gait.phases_for_horizon(first_phase);
  std::vector<ExtrapolatedConfig> configs;
  configs.reserve(std::size_t(phases));
  const double yaw0 = state.base.rpy.z();
  double last_ground = state.base.position.z() - state.h_ref;
  for (int j = 0; j < phases; ++j) {
    ExtrapolatedConfig c;
    c.time = double(j) * gait.step_duration;
    const Vec2 xy = integrate_arc(Vec2(state.base.position.x(), state.base.position.y()), yaw0,
                                  v_ref.x(), v_ref.y(), yaw_rate, c.time);
    ElevationSource local = terrain;
    local.default_ground_z = last_ground;
    PlaneCoeffs plane;
    try {
      plane = fit_plane(local, xy, cfg.fit_extent, cfg.fit_resolution, cfg.fit_resolution);
    } catch (const DegenerateFit&) {
      plane.a = 0.0;
      plane.b = 0.0;
      plane.c = elevation(local, xy.x(), xy.y());
    }
    c.local_plane = plane;
    c.position = Vec3(xy.x(), xy.y(), plane.height_at(xy) + state.h_ref);
    const double yaw = yaw0 + yaw_rate * c.time;
    // Terrain gradient expressed along the body axes; at yaw 0 this reduces
    // to roll = atan(b), pitch = -atan(a).
    const double sx = plane.a * std::cos(yaw) + plane.b * std::sin(yaw);
    const double sy = -plane.a * std::sin(yaw) + plane.b * std::cos(yaw);
    c.rpy = Vec3(std::atan(sy), -std::atan(sx), yaw);
    last_ground = plane.height_at(xy);
    configs.push_back(std::move(c));
  }
  return configs;
}

/// One contact to be created: its phase, foot, extrapolated hip and the
/// surfaces that survived the reach pre-filter.
struct ContactSlot {
  int phase = 0;
  Foot foot = Foot::LF;
  Vec3 hip = Vec3::Zero();
  double yaw = 0.0;
  std::vector<int> candidates;  // indices into the surface vector
};

inline Polygon2 rom_footprint(const Vec3& hip, double yaw, const KinematicBox& box) {
  const Vec2 center(0.5 * (box.lower.x() + box.upper.x()), 0.5 * (box.lower.y() + box.upper.y()));
  const Vec2 half(0.5 * (box.upper.x() - box.lower.x()), 0.5 * (box.upper.y() - box.lower.y()));
  const double c = std::cos(yaw), s = std::sin(yaw);
  auto corner = [&](double sx, double sy) {
    const Vec2 local = center + Vec2(sx * half.x(), sy * half.y());
    return Vec2(hip.x() + c * local.x() - s * local.y(), hip.y() + s * local.x() + c * local.y());
  };
  return {corner(-1, -1), corner(1, -1), corner(1, 1), corner(-1, 1)};
}

/// Keep only surfaces whose xy contour touches the xy projection of the foot's
/// reach box at the extrapolated hip. Throws NoReachableSurface when a contact
/// ends up with an empty candidate list.
inline std::vector<ContactSlot> preselect_surfaces(const std::vector<ExtrapolatedConfig>& configs,
                                                   const GaitPattern& gait,
                                                   const KinematicBox& box,
                                                   const std::vector<Surface>& surfaces,
                                                   const HipGeometry& hips = {},
                                                   int first_phase = 0) {
  std::vector<ContactSlot> slots;
  for (std::size_t j = 0; j < configs.size(); ++j) {
    const ExtrapolatedConfig& c = configs[j];
    // Hips ride with the tilted body; the reach box itself stays yaw-aligned
    // (legs hang along gravity).
    BasePose pose;
    pose.position = c.position;
    pose.rpy = c.rpy;
    const Mat3 r = pose.rotation();
    for (Foot f : gait.phase(first_phase + int(j)).swing_feet) {
      ContactSlot slot;
      slot.phase = int(j);
      slot.foot = f;
      slot.hip = c.position + r * hips.offset(f);
      slot.yaw = c.rpy.z();
      const Polygon2 rom = rom_footprint(slot.hip, slot.yaw, box);
      for (const Surface& s : surfaces) {
        if (convex_polygon_distance(s.contour_xy(), rom) <= 1e-9)
          slot.candidates.push_back(s.id);
      }
      if (slot.candidates.empty())
        throw NoReachableSurface(slot.phase, int(f),
                                 "no candidate surface for phase " + std::to_string(slot.phase) +
                                     " foot " + foot_name(f));
      slots.push_back(std::move(slot));
    }
  }
  return slots;
}

/// The surface-selection problem: one 3D position per upcoming contact, one
/// exactly-one binary block per contact over its candidate surfaces, Big-M
/// gated surface rows and kinematic box rows around the extrapolated hips.
/// Cost: w1 |p - p*|^2 on xy plus w2 |p - p_hip|^2.
inline MiqpProblem build_selection_miqp(const std::vector<ContactSlot>& slots,
                                        const std::vector<Surface>& surfaces,
                                        const KinematicBox& box, const Vec2& v_ref,
                                        double yaw_rate, const GaitPattern& gait,
                                        const SelectionConfig& cfg,
                                        std::vector<long>* binary_surface_out = nullptr) {
  const long n = long(slots.size());
  MiqpProblem p;
  p.big_m = cfg.big_m;
  p.base.H = MatX::Zero(3 * n, 3 * n);
  p.base.g = VecX::Zero(3 * n);
  p.base.Aeq.resize(0, 3 * n);
  p.base.beq.resize(0);

  RaibertParams raibert;
  raibert.stance_time = gait.step_duration;
  raibert.v_ref = v_ref;
  raibert.omega_ref = yaw_rate;

  std::vector<std::pair<VecX, double>> ineq;
  for (long j = 0; j < n; ++j) {
    const ContactSlot& slot = slots[std::size_t(j)];
    const Vec2 target = raibert_target(Vec2(slot.hip.x(), slot.hip.y()), raibert);
    p.base.H(3 * j + 0, 3 * j + 0) = 2.0 * (cfg.w1 + cfg.w2);
    p.base.H(3 * j + 1, 3 * j + 1) = 2.0 * (cfg.w1 + cfg.w2);
    p.base.H(3 * j + 2, 3 * j + 2) = 2.0 * cfg.w2;
    p.base.g(3 * j + 0) = -2.0 * (cfg.w1 * target.x() + cfg.w2 * slot.hip.x());
    p.base.g(3 * j + 1) = -2.0 * (cfg.w1 * target.y() + cfg.w2 * slot.hip.y());
    p.base.g(3 * j + 2) = -2.0 * cfg.w2 * slot.hip.z();
    p.c0 += cfg.w1 * target.squaredNorm() + cfg.w2 * slot.hip.squaredNorm();

    const Mat3 r = Eigen::AngleAxisd(slot.yaw, Vec3::UnitZ()).toRotationMatrix();
    for (int axis = 0; axis < 3; ++axis) {
      const Vec3 row = r.col(axis);
      VecX up = VecX::Zero(3 * n);
      up.segment(3 * j, 3) = row;
      ineq.emplace_back(up, row.dot(slot.hip) + box.upper(axis));
      VecX lo = VecX::Zero(3 * n);
      lo.segment(3 * j, 3) = -row;
      ineq.emplace_back(lo, -(row.dot(slot.hip) + box.lower(axis)));
    }
  }
  p.base.Ain.resize(long(ineq.size()), 3 * n);
  p.base.bin.resize(long(ineq.size()));
  for (std::size_t i = 0; i < ineq.size(); ++i) {
    p.base.Ain.row(long(i)) = ineq[i].first.transpose();
    p.base.bin(long(i)) = ineq[i].second;
  }

  std::vector<long> binary_surface;
  long next_binary = 0;
  for (long j = 0; j < n; ++j) {
    const ContactSlot& slot = slots[std::size_t(j)];
    BinaryGroup group;
    for (int cand : slot.candidates) {
      const Surface& surf = surfaces[std::size_t(cand)];
      const long b = next_binary++;
      group.members.push_back(b);
      binary_surface.push_back(surf.id);
      for (long r = 0; r < surf.S.rows(); ++r) {
        IndicatorRow ind;
        ind.row = VecX::Zero(3 * n);
        ind.row.segment(3 * j, 3) = surf.S.row(r);
        ind.rhs = surf.s(r);
        ind.binary = b;
        p.indicators.push_back(std::move(ind));
      }
    }
    p.groups.push_back(std::move(group));
  }
  if (binary_surface_out) *binary_surface_out = binary_surface;
  return p;
}

struct PlanEntry {
  int phase = 0;
  Foot foot = Foot::LF;
  int surface_id = -1;
  Vec3 position = Vec3::Zero();
};

struct SurfacePlan {
  MipStatus status = MipStatus::Infeasible;
  std::vector<PlanEntry> entries;
  double objective = std::numeric_limits<double>::quiet_NaN();
  MipStats stats;
};

/// Full selection stage: extrapolate, pre-filter, assemble and solve the MIP.
/// `surfaces` must be indexed by their ids (process_surfaces output order).
inline SurfacePlan plan_surfaces(const RobotState& state, const Vec2& v_ref, double yaw_rate,
                                 const GaitPattern& gait, const std::vector<Surface>& surfaces,
                                 const ElevationSource& terrain, const KinematicBox& box = {},
                                 const SelectionConfig& cfg = {}, const HipGeometry& hips = {},
                                 int first_phase = 0) {
  const auto configs = extrapolate_configs(state, v_ref, yaw_rate, gait, terrain, cfg, first_phase);
  const auto slots = preselect_surfaces(configs, gait, box, surfaces, hips, first_phase);
  std::vector<long> binary_surface;
  const MiqpProblem problem =
      build_selection_miqp(slots, surfaces, box, v_ref, yaw_rate, gait, cfg, &binary_surface);
  const MipSolution sol = solve_miqp(problem, cfg.timeout_s);

  SurfacePlan plan;
  plan.status = sol.status;
  plan.stats = sol.stats;
  plan.objective = sol.objective;
  if (sol.status == MipStatus::Infeasible || sol.assignment.empty()) return plan;
  for (std::size_t j = 0; j < slots.size(); ++j) {
    PlanEntry e;
    e.phase = slots[j].phase;
    e.foot = slots[j].foot;
    e.surface_id = int(binary_surface[std::size_t(sol.assignment[j])]);
    e.position = sol.x.segment(3 * long(j), 3);
    plan.entries.push_back(e);
  }
  return plan;
}

}  // namespace stepkit
