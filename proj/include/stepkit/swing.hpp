#pragma once

#include <optional>

#include "stepkit/bezier.hpp"
#include "stepkit/qp.hpp"
#include "stepkit/terrain.hpp"

namespace stepkit {

inline constexpr double kDefaultApex = 0.15;      // swing apex over the higher endpoint [m]
inline constexpr int kCollisionSamples = 11;      // n_c + 1 sample points on the curve

/// Closed-form swing reference: degree-5 polynomials on x and y, degree 6 on
/// z with the mid-swing apex pinned. Coefficients are in normalized time
/// tau = t / T.
struct ReferenceTrajectory {
  VecX cx;  // 6 coefficients
  VecX cy;  // 6 coefficients
  VecX cz;  // 7 coefficients
  double duration = 0.0;
  double apex = kDefaultApex;

  Vec3 position(double t) const {
    const double tau = t / duration;
    return Vec3(eval(cx, tau), eval(cy, tau), eval(cz, tau));
  }
  Vec3 velocity(double t) const {
    const double tau = t / duration;
    return Vec3(eval_d(cx, tau), eval_d(cy, tau), eval_d(cz, tau)) / duration;
  }
  Vec3 acceleration(double t) const {
    const double tau = t / duration;
    return Vec3(eval_dd(cx, tau), eval_dd(cy, tau), eval_dd(cz, tau)) / (duration * duration);
  }
  Vec3 start() const { return position(0.0); }
  Vec3 goal() const { return position(duration); }

 private:
  static double eval(const VecX& c, double tau) {
    double v = 0.0;
    for (long k = c.size() - 1; k >= 0; --k) v = v * tau + c(k);
    return v;
  }
  static double eval_d(const VecX& c, double tau) {
    double v = 0.0;
    for (long k = c.size() - 1; k >= 1; --k) v = v * tau + double(k) * c(k);
    return v;
  }
  static double eval_dd(const VecX& c, double tau) {
    double v = 0.0;
    for (long k = c.size() - 1; k >= 2; --k) v = v * tau + double(k) * double(k - 1) * c(k);
    return v;
  }
};

/// Boundary-condition solve for the swing reference. The first three
/// conditions continue the current position/velocity/acceleration, the end
/// arrives at rest, and z(T/2) sits `apex` above the higher endpoint.
inline ReferenceTrajectory reference_trajectory(const Vec3& start_pos, const Vec3& start_vel,
                                                const Vec3& start_acc, const Vec3& goal, double T,
                                                double apex = kDefaultApex) {
  if (T <= 0.0) throw std::invalid_argument("reference_trajectory: T must be positive");
  ReferenceTrajectory ref;
  ref.duration = T;
  ref.apex = apex;

  auto solve_axis = [&](int deg, double p0, double v0, double a0, double pT,
                        std::optional<double> mid) {
    const int n = deg + 1;
    MatX M = MatX::Zero(n, n);
    VecX rhs = VecX::Zero(n);
    // p(0), p'(0), p''(0) in tau coordinates.
    M(0, 0) = 1.0;
    rhs(0) = p0;
    M(1, 1) = 1.0;
    rhs(1) = v0 * T;
    M(2, 2) = 2.0;
    rhs(2) = a0 * T * T;
    for (int k = 0; k < n; ++k) {
      M(3, k) = 1.0;                                  // p(T)
      M(4, k) = double(k);                            // p'(T) = 0
      M(5, k) = double(k) * double(k - 1);            // p''(T) = 0
    }
    rhs(3) = pT;
    if (mid) {
      for (int k = 0; k < n; ++k) M(6, k) = std::pow(0.5, double(k));
      rhs(6) = *mid;
    }
    return VecX(M.partialPivLu().solve(rhs));
  };

  ref.cx = solve_axis(5, start_pos.x(), start_vel.x(), start_acc.x(), goal.x(), std::nullopt);
  ref.cy = solve_axis(5, start_pos.y(), start_vel.y(), start_acc.y(), goal.y(), std::nullopt);
  const double apex_z = std::max(start_pos.z(), goal.z()) + apex;
  ref.cz = solve_axis(6, start_pos.z(), start_vel.z(), start_acc.z(), goal.z(), apex_z);
  return ref;
}

/// One linear row w . p(t_k) >= rhs on a single curve sample.
struct SampleConstraint {
  int sample = 0;
  Vec3 row = Vec3::Zero();
  double rhs = 0.0;
};

struct CollisionConstraintSet {
  std::vector<double> times;  // n_c + 1 uniform samples over [0, T]
  std::vector<SampleConstraint> rows;
};

inline std::vector<double> uniform_samples(double T, int count = kCollisionSamples) {
  std::vector<double> t(static_cast<std::size_t>(count), 0.0);
  for (int k = 0; k < count; ++k) t[std::size_t(k)] = T * double(k) / double(count - 1);
  return t;
}

/// Scan the sampled reference against the vertically extruded outer contours.
/// An obstacle whose volume the reference enters contributes "stay above the
/// top plane" rows on every interior sample over that contour; the covered
/// intervals additionally get midpoint rows so the fitted curve cannot dip
/// between samples. When the swing lands on the obstacle itself the rows are
/// relaxed by the landing offset so the touchdown stays feasible.
inline CollisionConstraintSet active_halfspaces(const ReferenceTrajectory& reference,
                                                const std::vector<ObstacleContour>& obstacles,
                                                int samples = kCollisionSamples) {
  CollisionConstraintSet set;
  const std::vector<double> base = uniform_samples(reference.duration, samples);
  auto covered_by = [&](double t, const ObstacleContour& obs) {
    const Vec3 p = reference.position(t);
    return point_in_polygon(obs.contour, Vec2(p.x(), p.y()));
  };

  std::vector<const ObstacleContour*> active;
  for (const ObstacleContour& obs : obstacles) {
    if (obs.contour.size() < 3) continue;
    for (std::size_t k = 1; k + 1 < base.size(); ++k) {
      const Vec3 p = reference.position(base[k]);
      if (point_in_polygon(obs.contour, Vec2(p.x(), p.y())) &&
          p.z() < obs.plane.height_at(p.x(), p.y()) - 1e-9) {
        active.push_back(&obs);
        break;
      }
    }
  }

  set.times = base;
  for (const ObstacleContour* obs : active) {
    for (std::size_t k = 0; k + 1 < base.size(); ++k) {
      if (covered_by(base[k], *obs) || covered_by(base[k + 1], *obs))
        set.times.push_back(0.5 * (base[k] + base[k + 1]));
    }
  }
  std::sort(set.times.begin(), set.times.end());
  set.times.erase(std::unique(set.times.begin(), set.times.end(),
                              [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                  set.times.end());

  const Vec3 goal = reference.goal();
  for (const ObstacleContour* obs : active) {
    double relax = 0.0;
    if (point_in_polygon(obs->contour, Vec2(goal.x(), goal.y()))) {
      relax = std::min(0.0, goal.z() - obs->plane.height_at(goal.x(), goal.y()));
    }
    const Vec3 row(-obs->plane.a, -obs->plane.b, 1.0);  // row . p >= c means above
    for (std::size_t k = 1; k + 1 < set.times.size(); ++k) {
      if (!covered_by(set.times[k], *obs)) continue;
      set.rows.push_back({int(k), row, obs->plane.c + relax});
    }
  }
  return set;
}

struct SwingFit {
  QpStatus status = QpStatus::Infeasible;
  BezierCurve curve;
};

/// Degree-7 Bezier tracking the reference at the sample points, subject to
/// exact boundary rows and the collision half-spaces. Boundary conditions pin
/// P0..P2 and P5..P7, leaving P3 and P4 as the QP variables.
inline SwingFit fit_bezier(const ReferenceTrajectory& reference,
                           const CollisionConstraintSet& constraints) {
  const double T = reference.duration;
  constexpr int d = 7;
  std::vector<Vec3> ctrl(std::size_t(d) + 1, Vec3::Zero());
  const Vec3 p0 = reference.position(0.0);
  const Vec3 v0 = reference.velocity(0.0);
  const Vec3 a0 = reference.acceleration(0.0);
  const Vec3 pT = reference.goal();
  ctrl[0] = p0;
  ctrl[1] = p0 + T / d * v0;
  ctrl[2] = T * T / double(d * (d - 1)) * a0 + 2.0 * ctrl[1] - ctrl[0];
  ctrl[7] = pT;
  ctrl[6] = pT;  // zero end velocity
  ctrl[5] = pT;  // zero end acceleration

  const std::vector<double>& times =
      constraints.times.empty() ? uniform_samples(T) : constraints.times;
  const std::size_t ns = times.size();

  // Free variables: [P3; P4] interleaved per axis.
  Eigen::Matrix2d phi_sum = Eigen::Matrix2d::Zero();
  Eigen::Vector2d phi;
  MatX g_acc = MatX::Zero(2, 3);
  std::vector<Eigen::Vector2d> phis(ns);
  std::vector<Vec3> fixed_part(ns);
  for (std::size_t k = 0; k < ns; ++k) {
    const double tau = T > 0.0 ? times[k] / T : 0.0;
    phi << bernstein(d, 3, tau), bernstein(d, 4, tau);
    phis[k] = phi;
    Vec3 fixed = Vec3::Zero();
    for (int i = 0; i <= d; ++i) {
      if (i == 3 || i == 4) continue;
      fixed += bernstein(d, i, tau) * ctrl[std::size_t(i)];
    }
    fixed_part[k] = fixed;
    phi_sum += phi * phi.transpose();
    g_acc += phi * (reference.position(times[k]) - fixed).transpose();
  }

  QpProblem qp;
  qp.H = MatX::Zero(6, 6);
  qp.g = VecX::Zero(6);
  for (int axis = 0; axis < 3; ++axis) {
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) qp.H(3 * r + axis, 3 * c + axis) = 2.0 * phi_sum(r, c);
      qp.g(3 * r + axis) = -2.0 * g_acc(r, axis);
    }
  }
  qp.Aeq.resize(0, 6);
  qp.beq.resize(0);
  qp.Ain.resize(long(constraints.rows.size()), 6);
  qp.bin.resize(long(constraints.rows.size()));
  for (std::size_t r = 0; r < constraints.rows.size(); ++r) {
    const SampleConstraint& sc = constraints.rows[r];
    const Eigen::Vector2d& ph = phis[std::size_t(sc.sample)];
    for (int axis = 0; axis < 3; ++axis) {
      qp.Ain(long(r), axis) = -ph(0) * sc.row(axis);
      qp.Ain(long(r), 3 + axis) = -ph(1) * sc.row(axis);
    }
    qp.bin(long(r)) = -sc.rhs + sc.row.dot(fixed_part[std::size_t(sc.sample)]);
  }

  SwingFit fit;
  const QpSolution sol = solve_qp(qp);
  fit.status = sol.status;
  if (sol.status != QpStatus::Optimal) return fit;
  ctrl[3] = sol.x.head(3);
  ctrl[4] = sol.x.tail(3);
  fit.curve.control_points = ctrl;
  fit.curve.duration = T;
  return fit;
}

}  // namespace stepkit
