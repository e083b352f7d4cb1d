#pragma once

#include <deque>
#include <optional>
#include <string>

#include "stepkit/selection.hpp"
#include "stepkit/swing.hpp"

namespace stepkit {

struct CommandSetpoint {
  double t = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double yaw_rate = 0.0;
};

struct Scene {
  std::vector<Surface> surfaces;
  std::vector<ObstacleContour> obstacles;
  std::optional<HeightmapGrid> heightmap;
  RobotState start;
  std::vector<CommandSetpoint> commands;
  double default_ground_z = 0.0;

  ElevationSource terrain() const {
    ElevationSource src;
    src.surfaces = &surfaces;
    src.heightmap = heightmap ? &*heightmap : nullptr;
    src.default_ground_z = default_ground_z;
    return src;
  }

  CommandSetpoint command_at(double t) const {
    CommandSetpoint active;
    for (const auto& c : commands) {
      if (c.t <= t + 1e-12) active = c;
    }
    active.t = t;
    return active;
  }
};

struct PipelineConfig {
  double control_rate = 50.0;  // [Hz]
  GaitPattern gait = GaitPattern::walk();
  KinematicBox box;
  HipGeometry hips;
  SelectionConfig selection;
  SegmentationConfig segmentation;
  double apex = kDefaultApex;
  double swing_freeze = 0.7;     // stop updating targets after this swing fraction
  double z_land_offset = -0.01;  // curve goal offset below the plane [m]
  bool plan_async = false;       // one-phase plan latency, as on the robot
  double plan_budget_s = 0.25;
  double retry_apex_raise = 0.1;

  double dt() const { return 1.0 / control_rate; }
};

/// Component-wise mean of the pose window; yaw uses the circular mean.
inline BasePose filter_base(const std::deque<BasePose>& history) {
  BasePose out;
  if (history.empty()) return out;
  Vec3 pos = Vec3::Zero();
  Vec3 cos_acc = Vec3::Zero();
  Vec3 sin_acc = Vec3::Zero();
  for (const auto& p : history) {
    pos += p.position;
    for (int i = 0; i < 3; ++i) {
      cos_acc(i) += std::cos(p.rpy(i));
      sin_acc(i) += std::sin(p.rpy(i));
    }
  }
  out.position = pos / double(history.size());
  for (int i = 0; i < 3; ++i) out.rpy(i) = std::atan2(sin_acc(i), cos_acc(i));
  return out;
}

enum class RolloutStatus { Completed, Infeasible, Timeout };

struct StageTimes {
  double plan_ms = 0.0;
  double footstep_ms = 0.0;
  double swing_ms = 0.0;
};

struct TickRecord {
  double t = 0.0;
  CommandSetpoint command;
  BasePose base_raw;
  BasePose base_filtered;
  std::array<int, 4> foot_surface = {-1, -1, -1, -1};
  std::array<Vec3, 4> foot_positions;
  std::array<Vec3, 4> footstep_targets;
  std::array<bool, 4> swinging = {false, false, false, false};
  StageTimes stage_ms;
  bool over_budget = false;
  int plan_index = -1;
};

struct ContactEvent {
  double t = 0.0;
  int phase = 0;
  Foot foot = Foot::LF;
  int surface_id = -1;
  Vec3 position = Vec3::Zero();
};

struct PlanRecord {
  double t = 0.0;
  int created_phase = 0;
  SurfacePlan plan;
};

struct CurveRecord {
  double t = 0.0;
  Foot foot = Foot::LF;
  BezierCurve curve;
};

struct RolloutTrace {
  std::vector<TickRecord> ticks;
  std::vector<ContactEvent> contacts;
  std::vector<PlanRecord> plans;
  std::vector<CurveRecord> curves;
  std::vector<std::string> warnings;
  RolloutStatus status = RolloutStatus::Completed;
  std::string message;
};

/// Discrete-time control loop over a static scene: plans at phase boundaries,
/// refreshes footsteps and swing curves at control rate, and advances the base
/// along the commanded twist (the whole-body layer is idealized away).
class Pipeline {
 public:
  Pipeline(const Scene& scene, const PipelineConfig& cfg)
      : scene_(scene), cfg_(cfg), state_(scene.start) {
    for (const auto& phase : cfg_.gait.phases) {
      const double k = phase.duration * cfg_.control_rate;
      if (std::abs(k - std::round(k)) > 1e-9)
        throw ValidationError("control period does not divide the phase duration");
    }
    filter_window_ = std::max<std::size_t>(1, std::size_t(std::llround(
                                                  cfg_.gait.cycle_duration() / cfg_.dt())));
    check_start_contacts();
  }

  const RolloutTrace& trace() const { return trace_; }
  RolloutTrace& trace() { return trace_; }
  bool halted() const { return halted_; }
  double time() const { return t_; }
  const RobotState& state() const { return state_; }

  /// One control tick. Returns false once the rollout has halted.
  bool step() {
    if (halted_) return false;
    const double dt = cfg_.dt();
    const CommandSetpoint cmd = scene_.command_at(t_);

    if (phase_elapsed_ == 0.0) start_phase(cmd);
    if (halted_) return false;

    history_.push_back(state_.base);
    while (history_.size() > filter_window_) history_.pop_front();
    const BasePose filtered = filter_base(history_);
    const BasePose compensated = compensate_delay(filtered, cmd);

    TickRecord rec;
    rec.t = t_;
    rec.command = cmd;
    rec.base_raw = state_.base;
    rec.base_filtered = filtered;
    rec.plan_index = int(trace_.plans.size()) - 1;
    rec.stage_ms.plan_ms = pending_plan_ms_;
    rec.over_budget = pending_plan_ms_ > cfg_.plan_budget_s * 1000.0;
    pending_plan_ms_ = 0.0;

    const double T = current_phase().duration;
    for (Foot f : current_phase().swing_feet) {
      auto& sw = swings_[std::size_t(f)];
      if (!sw.active) continue;
      const double fraction = phase_elapsed_ / T;
      if (fraction < cfg_.swing_freeze) {
        refresh_footstep(f, compensated, cmd, rec);
        refit_swing(f, rec);
        if (halted_) return false;
      }
    }

    for (Foot f : kAllFeet) {
      const auto& sw = swings_[std::size_t(f)];
      rec.swinging[std::size_t(f)] = sw.active;
      rec.foot_surface[std::size_t(f)] = sw.active ? sw.surface_id : stance_surface_[std::size_t(f)];
      rec.footstep_targets[std::size_t(f)] = sw.active ? sw.target : state_.foot(f);
      rec.foot_positions[std::size_t(f)] = state_.foot(f);
    }
    trace_.ticks.push_back(rec);

    advance_base(cmd, dt);
    phase_elapsed_ += dt;
    for (Foot f : current_phase().swing_feet) {
      auto& sw = swings_[std::size_t(f)];
      if (!sw.active) continue;
      const double local = std::min(phase_elapsed_, T) - sw.curve_t0;
      state_.foot(f) = sw.curve.position(std::clamp(local, 0.0, sw.curve.duration));
    }

    if (phase_elapsed_ >= T - 1e-9) finish_phase();
    t_ += dt;
    return !halted_;
  }

 private:
  struct SwingState {
    bool active = false;
    int surface_id = -1;
    Vec3 target = Vec3::Zero();
    BezierCurve curve;
    double curve_t0 = 0.0;  // phase-local time the active curve starts at
  };

  const Scene& scene_;
  PipelineConfig cfg_;
  RobotState state_;
  RolloutTrace trace_;
  std::deque<BasePose> history_;
  std::size_t filter_window_ = 1;
  std::array<SwingState, 4> swings_;
  std::array<int, 4> stance_surface_ = {-1, -1, -1, -1};
  std::optional<PlanRecord> pending_;  // async mode: plan for the next phase
  double pending_plan_ms_ = 0.0;
  double t_ = 0.0;
  double phase_elapsed_ = 0.0;
  int phase_index_ = 0;
  bool halted_ = false;

  const GaitPhase& current_phase() const { return cfg_.gait.phase(phase_index_); }

  void halt(RolloutStatus status, const std::string& message) {
    halted_ = true;
    trace_.status = status;
    trace_.message = message;
  }

  void check_start_contacts() {
    for (Foot f : kAllFeet) {
      stance_surface_[std::size_t(f)] = surface_under(state_.foot(f));
      if (stance_surface_[std::size_t(f)] < 0)
        trace_.warnings.push_back(std::string("start foot ") + foot_name(f) +
                                  " is not on any surface");
    }
  }

  int surface_under(const Vec3& p) const {
    for (const auto& s : scene_.surfaces) {
      if (!point_in_polygon(s.contour_xy(), Vec2(p.x(), p.y()))) continue;
      if (std::abs(s.plane.height_at(p.x(), p.y()) - p.z()) < 0.05) return s.id;
    }
    return -1;
  }

  BasePose compensate_delay(const BasePose& filtered, const CommandSetpoint& cmd) const {
    BasePose out = filtered;
    const double lag = 0.5 * double(history_.size()) * cfg_.dt();
    const Mat3 rz = Eigen::AngleAxisd(out.rpy.z(), Vec3::UnitZ()).toRotationMatrix();
    out.position += lag * (rz * Vec3(cmd.vx, cmd.vy, 0.0));
    out.rpy.z() += lag * cmd.yaw_rate;
    return out;
  }

  void start_phase(const CommandSetpoint& cmd) {
    PlanRecord record;
    record.t = t_;
    record.created_phase = phase_index_;
    const auto plan_t0 = std::chrono::steady_clock::now();
    if (cfg_.plan_async && pending_) {
      record = *pending_;
      pending_.reset();
    } else {
      record.plan = run_planner(cmd);
    }
    pending_plan_ms_ =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - plan_t0).count() * 1e3;

    if (record.plan.status == MipStatus::Infeasible) {
      halt(RolloutStatus::Infeasible, "surface plan infeasible at phase " +
                                          std::to_string(phase_index_));
      return;
    }
    if (record.plan.status == MipStatus::Timeout) {
      if (record.plan.entries.empty() || !plan_contained(record.plan)) {
        if (trace_.plans.empty()) {
          halt(RolloutStatus::Timeout, "no usable plan within budget");
          return;
        }
        trace_.warnings.push_back("plan timeout at phase " + std::to_string(phase_index_) +
                                  ", keeping previous plan");
        record.plan = trace_.plans.back().plan;
        record.created_phase = trace_.plans.back().created_phase;
      }
    }
    trace_.plans.push_back(record);

    if (cfg_.plan_async) {
      // Plan for the next phase from the current snapshot; applied one phase late.
      PlanRecord next;
      next.t = t_;
      next.created_phase = phase_index_ + 1;
      next.plan = run_planner(cmd, 1);
      pending_ = next;
    }

    for (Foot f : current_phase().swing_feet) start_swing(f, record);
  }

  SurfacePlan run_planner(const CommandSetpoint& cmd, int phase_offset = 0) {
    RobotState snapshot = state_;
    if (phase_offset > 0) {
      const double dt_ahead = current_phase().duration * double(phase_offset);
      const Vec2 xy = integrate_arc(
          Vec2(snapshot.base.position.x(), snapshot.base.position.y()), snapshot.base.rpy.z(),
          cmd.vx, cmd.vy, cmd.yaw_rate, dt_ahead);
      snapshot.base.position.x() = xy.x();
      snapshot.base.position.y() = xy.y();
      snapshot.base.rpy.z() += cmd.yaw_rate * dt_ahead;
    }
    try {
      return plan_surfaces(snapshot, Vec2(cmd.vx, cmd.vy), cmd.yaw_rate, cfg_.gait,
                           scene_.surfaces, scene_.terrain(), cfg_.box, cfg_.selection,
                           cfg_.hips, phase_index_ + phase_offset);
    } catch (const NoReachableSurface& e) {
      SurfacePlan plan;
      plan.status = MipStatus::Infeasible;
      trace_.warnings.push_back(e.what());
      return plan;
    }
  }

  const Surface* surface_by_id(int id) const {
    for (const auto& s : scene_.surfaces)
      if (s.id == id) return &s;
    return nullptr;
  }

  bool plan_contained(const SurfacePlan& plan) const {
    for (const auto& e : plan.entries) {
      const Surface* s = surface_by_id(e.surface_id);
      if (!s || !s->contains(e.position, 1e-6)) return false;
    }
    return true;
  }

  const PlanEntry* plan_entry(const PlanRecord& record, int abs_phase, Foot foot) const {
    const int rel = abs_phase - record.created_phase;
    for (const auto& e : record.plan.entries) {
      if (e.phase == rel && e.foot == foot) return &e;
    }
    return nullptr;
  }

  void start_swing(Foot f, const PlanRecord& record) {
    const PlanEntry* entry = plan_entry(record, phase_index_, f);
    if (!entry) {
      halt(RolloutStatus::Infeasible, std::string("no plan entry for foot ") + foot_name(f) +
                                          " at phase " + std::to_string(phase_index_));
      return;
    }
    auto& sw = swings_[std::size_t(f)];
    sw.active = true;
    sw.surface_id = entry->surface_id;
    sw.curve_t0 = 0.0;
    state_.in_contact[std::size_t(f)] = false;

    const Surface* surf_ptr = surface_by_id(entry->surface_id);
    if (!surf_ptr) {
      halt(RolloutStatus::Infeasible, "planned surface vanished from the scene");
      return;
    }
    const Surface& surf = *surf_ptr;
    const BasePose filtered = history_.empty() ? state_.base : filter_base(history_);
    const CommandSetpoint cmd = scene_.command_at(t_);
    const BasePose comp = compensate_delay(filtered, cmd);
    const Vec3 hip = comp.position + comp.rotation() * cfg_.hips.offset(f);
    RaibertParams rp;
    rp.stance_time = cfg_.gait.step_duration;
    rp.height = state_.h_ref;
    rp.v_ref = Vec2(cmd.vx, cmd.vy);
    rp.omega_ref = cmd.yaw_rate;
    const Vec2 target2 = raibert_target(Vec2(hip.x(), hip.y()), rp);
    const QpSolution qs = optimize_footstep(target2, surf, cfg_.box, hip, comp.rpy.z());
    if (qs.status != QpStatus::Optimal) {
      // Fall back to the plan's own position for this contact.
      sw.target = entry->position;
      trace_.warnings.push_back(std::string("footstep QP infeasible at swing start, foot ") +
                                foot_name(f));
    } else {
      sw.target = qs.x;
    }
    fit_swing_curve(f, state_.foot(f), Vec3::Zero(), Vec3::Zero(),
                    current_phase().duration, true);
  }

  void refresh_footstep(Foot f, const BasePose& comp, const CommandSetpoint& cmd,
                        TickRecord& rec) {
    auto& sw = swings_[std::size_t(f)];
    const auto t0 = std::chrono::steady_clock::now();
    const Surface* surf_ptr = surface_by_id(sw.surface_id);
    if (!surf_ptr) {
      trace_.warnings.push_back(std::string("surface of foot ") + foot_name(f) +
                                " vanished mid-swing, keeping previous target");
      return;
    }
    const Surface& surf = *surf_ptr;
    const Vec3 hip = comp.position + comp.rotation() * cfg_.hips.offset(f);
    RaibertParams rp;
    rp.stance_time = cfg_.gait.step_duration;
    rp.height = state_.h_ref;
    rp.v_ref = Vec2(cmd.vx, cmd.vy);
    rp.omega_ref = cmd.yaw_rate;
    const Vec2 target2 = raibert_target(Vec2(hip.x(), hip.y()), rp);
    const QpSolution qs = optimize_footstep(target2, surf, cfg_.box, hip, comp.rpy.z());
    if (qs.status == QpStatus::Optimal) {
      sw.target = qs.x;
    } else {
      trace_.warnings.push_back(std::string("footstep QP infeasible, foot ") + foot_name(f) +
                                " keeps previous target");
    }
    rec.stage_ms.footstep_ms +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() * 1e3;
  }

  void refit_swing(Foot f, TickRecord& rec) {
    auto& sw = swings_[std::size_t(f)];
    const double T = current_phase().duration;
    const double remaining = T - phase_elapsed_;
    if (remaining < 2.0 * cfg_.dt()) return;
    const auto t0 = std::chrono::steady_clock::now();
    const double local = phase_elapsed_ - sw.curve_t0;
    const Vec3 pos = sw.curve.position(local);
    const Vec3 vel = sw.curve.velocity(local);
    const Vec3 acc = sw.curve.acceleration(local);
    fit_swing_curve(f, pos, vel, acc, remaining, false);
    rec.stage_ms.swing_ms +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() * 1e3;
  }

  void fit_swing_curve(Foot f, const Vec3& pos, const Vec3& vel, const Vec3& acc,
                       double duration, bool fresh) {
    auto& sw = swings_[std::size_t(f)];
    Vec3 goal = sw.target;
    goal.z() += cfg_.z_land_offset;

    double apex = cfg_.apex;
    if (!fresh) {
      // Keep the remaining profile of the active curve instead of stacking a
      // new apex on the already lifted foot.
      const double local = phase_elapsed_ - sw.curve_t0;
      const double t_mid = std::clamp(local + 0.5 * duration, 0.0, sw.curve.duration);
      const double z_mid = sw.curve.position(t_mid).z();
      apex = std::max(0.0, z_mid - std::max(pos.z(), goal.z()));
    }

    for (int attempt = 0; attempt < 2; ++attempt) {
      const ReferenceTrajectory ref =
          reference_trajectory(pos, vel, acc, goal, duration, apex);
      const CollisionConstraintSet constraints = active_halfspaces(ref, scene_.obstacles);
      const SwingFit fit = fit_bezier(ref, constraints);
      if (fit.status == QpStatus::Optimal) {
        sw.curve = fit.curve;
        sw.curve_t0 = phase_elapsed_;
        trace_.curves.push_back({t_, f, fit.curve});
        return;
      }
      apex += cfg_.retry_apex_raise;
    }
    if (fresh) {
      halt(RolloutStatus::Infeasible,
           std::string("swing trajectory infeasible for foot ") + foot_name(f));
      return;
    }
    trace_.warnings.push_back(std::string("swing refit infeasible, foot ") + foot_name(f) +
                              " keeps previous curve");
  }

  void advance_base(const CommandSetpoint& cmd, double dt) {
    const Vec2 xy =
        integrate_arc(Vec2(state_.base.position.x(), state_.base.position.y()),
                      state_.base.rpy.z(), cmd.vx, cmd.vy, cmd.yaw_rate, dt);
    ElevationSource src = scene_.terrain();
    src.default_ground_z = state_.base.position.z() - state_.h_ref;
    PlaneCoeffs plane;
    try {
      plane = fit_plane(src, xy, cfg_.selection.fit_extent, cfg_.selection.fit_resolution,
                        cfg_.selection.fit_resolution);
    } catch (const DegenerateFit&) {
      plane.c = elevation(src, xy.x(), xy.y());
    }
    state_.base.position = Vec3(xy.x(), xy.y(), plane.height_at(xy) + state_.h_ref);
    const double yaw = state_.base.rpy.z() + cmd.yaw_rate * dt;
    const double sx = plane.a * std::cos(yaw) + plane.b * std::sin(yaw);
    const double sy = -plane.a * std::sin(yaw) + plane.b * std::cos(yaw);
    state_.base.rpy = Vec3(std::atan(sy), -std::atan(sx), yaw);
    state_.base_velocity = state_.base.yaw_rotation() * Vec3(cmd.vx, cmd.vy, 0.0);
  }

  void finish_phase() {
    for (Foot f : current_phase().swing_feet) {
      auto& sw = swings_[std::size_t(f)];
      if (!sw.active) continue;
      // Touchdown lands exactly on the optimized target (on the plane).
      state_.foot(f) = sw.target;
      state_.in_contact[std::size_t(f)] = true;
      stance_surface_[std::size_t(f)] = sw.surface_id;
      trace_.contacts.push_back({t_ + cfg_.dt(), phase_index_, f, sw.surface_id, sw.target});
      sw = SwingState{};
    }
    ++phase_index_;
    phase_elapsed_ = 0.0;
  }
};

/// Deterministic replay: identical inputs produce identical traces.
inline RolloutTrace rollout(const Scene& scene, const PipelineConfig& cfg, double duration) {
  if (duration <= 0.0) throw std::invalid_argument("rollout: duration must be positive");
  Pipeline pipeline(scene, cfg);
  const long ticks = std::lround(duration * cfg.control_rate);
  for (long i = 0; i < ticks; ++i) {
    if (!pipeline.step()) break;
  }
  return pipeline.trace();
}

}  // namespace stepkit
