#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "stepkit/swing.hpp"

using namespace stepkit;

TEST_CASE("reference trajectory for a step in place", "[swing]") {
  const ReferenceTrajectory ref = reference_trajectory(
      Vec3(0.2, 0.1, 0.0), Vec3::Zero(), Vec3::Zero(), Vec3(0.2, 0.1, 0.0), 0.6, 0.15);
  for (double t = 0.0; t <= 0.6 + 1e-12; t += 0.05) {
    const Vec3 p = ref.position(t);
    CHECK(p.x() == Catch::Approx(0.2).margin(1e-10));
    CHECK(p.y() == Catch::Approx(0.1).margin(1e-10));
  }
  CHECK(ref.position(0.3).z() == Catch::Approx(0.15).margin(1e-10));
  // Symmetric bump.
  CHECK(ref.position(0.1).z() == Catch::Approx(ref.position(0.5).z()).margin(1e-9));
  CHECK(ref.velocity(0.6).norm() < 1e-9);
  CHECK(ref.acceleration(0.6).norm() < 1e-8);
}

TEST_CASE("reference trajectory boundary rows for a stair tread", "[swing]") {
  const Vec3 start(0, 0, 0);
  const Vec3 goal(0.29, 0, 0.17);
  const ReferenceTrajectory ref =
      reference_trajectory(start, Vec3::Zero(), Vec3::Zero(), goal, 0.6, 0.15);
  CHECK((ref.position(0.0) - start).norm() < 1e-10);
  CHECK((ref.position(0.6) - goal).norm() < 1e-10);
  CHECK(ref.velocity(0.0).norm() < 1e-10);
  CHECK(ref.acceleration(0.0).norm() < 1e-9);
  CHECK(ref.velocity(0.6).norm() < 1e-9);
  CHECK(ref.acceleration(0.6).norm() < 1e-8);
  CHECK(ref.position(0.3).z() == Catch::Approx(0.17 + 0.15).margin(1e-10));
}

TEST_CASE("reference trajectory honours a nonzero start velocity", "[swing]") {
  const Vec3 v0(0.1, 0.0, 0.0);
  const ReferenceTrajectory ref =
      reference_trajectory(Vec3::Zero(), v0, Vec3::Zero(), Vec3(0.2, 0, 0), 0.5, 0.15);
  CHECK((ref.velocity(0.0) - v0).norm() < 1e-10);
}

TEST_CASE("bezier endpoint identities and partition of unity", "[swing][bezier]") {
  BezierCurve c;
  c.duration = 0.7;
  std::mt19937 gen(15);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 8; ++i) c.control_points.emplace_back(u(gen), u(gen), u(gen));
  CHECK((c.position(0.0) - c.control_points.front()).norm() < 1e-12);
  CHECK((c.position(0.7) - c.control_points.back()).norm() < 1e-12);

  BezierCurve constant;
  constant.duration = 0.7;
  constant.control_points.assign(8, Vec3(0.3, -0.2, 0.5));
  for (double t = 0.0; t <= 0.7 + 1e-12; t += 0.07) {
    CHECK((constant.position(t) - Vec3(0.3, -0.2, 0.5)).norm() < 1e-12);
    CHECK(constant.velocity(t).norm() < 1e-12);
  }
  CHECK_THROWS_AS(c.position(0.8), OutOfDomain);
}

TEST_CASE("de Casteljau matches direct Bernstein evaluation", "[swing][bezier][oracle]") {
  std::mt19937 gen(27);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    BezierCurve c;
    c.duration = 0.3 + 0.5 * std::abs(u(gen));
    const int d = 3 + trial % 6;
    for (int i = 0; i <= d; ++i) c.control_points.emplace_back(u(gen), u(gen), u(gen));
    for (int k = 0; k <= 10; ++k) {
      const double t = c.duration * double(k) / 10.0;
      const Vec3 direct = oracles::bezier_direct(c.control_points, t, c.duration);
      CHECK((c.position(t) - direct).norm() < 1e-12);
    }
  }
}

TEST_CASE("curve stays in the convex hull of its control points", "[swing][bezier]") {
  std::mt19937 gen(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BezierCurve c;
  c.duration = 0.6;
  for (int i = 0; i < 8; ++i) c.control_points.emplace_back(u(gen), u(gen), u(gen));
  // Check the xy projection hull (hull membership is preserved by projection).
  Polygon2 pts;
  for (const auto& p : c.control_points) pts.emplace_back(p.x(), p.y());
  const Polygon2 hull = convex_hull(pts);
  for (int k = 0; k <= 100; ++k) {
    const Vec3 p = c.position(0.6 * double(k) / 100.0);
    CHECK(point_in_polygon(hull, Vec2(p.x(), p.y()), 1e-9));
  }
}

TEST_CASE("unconstrained fit reproduces the reference exactly", "[swing]") {
  std::mt19937 gen(33);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int trial = 0; trial < 25; ++trial) {
    const Vec3 start(u(gen), u(gen), 0.1 * std::abs(u(gen)));
    const Vec3 vel(u(gen), u(gen), u(gen));
    const Vec3 acc(u(gen), u(gen), u(gen));
    const Vec3 goal(start.x() + 0.3, u(gen), 0.1 * std::abs(u(gen)));
    const double T = 0.4 + 0.4 * std::abs(u(gen));
    const ReferenceTrajectory ref = reference_trajectory(start, vel, acc, goal, T, 0.15);
    const SwingFit fit = fit_bezier(ref, CollisionConstraintSet{});
    REQUIRE(fit.status == QpStatus::Optimal);
    for (int k = 0; k <= 100; ++k) {
      const double t = T * double(k) / 100.0;
      CHECK((fit.curve.position(t) - ref.position(t)).norm() < 1e-9);
    }
  }
}

TEST_CASE("degree-elevated reference equals the reference everywhere", "[swing][bezier]") {
  const ReferenceTrajectory ref = reference_trajectory(
      Vec3::Zero(), Vec3(0.1, 0, 0), Vec3::Zero(), Vec3(0.3, 0.1, 0.17), 0.6, 0.15);
  // Assemble the z polynomial (degree 6) as control points, then elevate to 7.
  std::vector<Vec3> coeffs(7, Vec3::Zero());
  for (int k = 0; k < 6; ++k) {
    coeffs[std::size_t(k)].x() = ref.cx(k);
    coeffs[std::size_t(k)].y() = ref.cy(k);
  }
  for (int k = 0; k < 7; ++k) coeffs[std::size_t(k)].z() = ref.cz(k);
  const BezierCurve deg6 = bezier_from_monomial(coeffs, 0.6);
  const BezierCurve deg7 = elevate_degree(deg6);
  REQUIRE(deg7.degree() == 7);
  for (int k = 0; k <= 50; ++k) {
    const double t = 0.6 * double(k) / 50.0;
    CHECK((deg7.position(t) - ref.position(t)).norm() < 1e-10);
  }
}

namespace {

ObstacleContour step_obstacle(double x_front, double height, double outer = 0.04) {
  // A step whose outer contour starts at x_front - outer.
  ObstacleContour obs;
  obs.contour = {Vec2(x_front - outer, -0.6), Vec2(x_front + 1.0, -0.6),
                 Vec2(x_front + 1.0, 0.6), Vec2(x_front - outer, 0.6)};
  obs.plane = PlaneCoeffs{0.0, 0.0, height};
  return obs;
}

}  // namespace

TEST_CASE("active_halfspaces is empty without obstacles", "[swing]") {
  const ReferenceTrajectory ref = reference_trajectory(
      Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3(0.3, 0, 0), 0.6, 0.15);
  const auto set = active_halfspaces(ref, {});
  CHECK(set.rows.empty());
  CHECK(set.times.size() == 11);
}

TEST_CASE("active_halfspaces ignores obstacles beside the corridor", "[swing]") {
  const ReferenceTrajectory ref = reference_trajectory(
      Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3(0.3, 0, 0), 0.6, 0.15);
  ObstacleContour aside;
  aside.contour = {Vec2(0, 2), Vec2(1, 2), Vec2(1, 3), Vec2(0, 3)};
  aside.plane = PlaneCoeffs{0, 0, 0.4};
  CHECK(active_halfspaces(ref, {aside}).rows.empty());
}

TEST_CASE("step-up grazing produces top-plane rows on covered samples", "[swing][oracle]") {
  // Swing from the ground onto a 0.2 m step with a low apex: the early samples
  // enter the extruded volume through the front face region.
  const double x_front = 0.1;
  const ObstacleContour obs = step_obstacle(x_front, 0.2);
  const Vec3 start(0, 0, 0);
  const Vec3 goal(0.35, 0, 0.2);
  const ReferenceTrajectory ref =
      reference_trajectory(start, Vec3::Zero(), Vec3::Zero(), goal, 0.6, 0.05);
  const auto set = active_halfspaces(ref, {obs});
  REQUIRE_FALSE(set.rows.empty());

  // Oracle: sampled points over the outer polygon below the top plane exist.
  bool entered = false;
  for (std::size_t k = 1; k + 1 < set.times.size(); ++k) {
    const Vec3 p = ref.position(set.times[k]);
    if (point_in_polygon(obs.contour, Vec2(p.x(), p.y())) && p.z() < 0.2 - 1e-9) entered = true;
  }
  REQUIRE(entered);
  for (const auto& row : set.rows) {
    // Row is the top plane: z >= 0.2 at covered samples.
    CHECK(row.row.z() == Catch::Approx(1.0));
    CHECK(row.rhs == Catch::Approx(0.2));
    const Vec3 p = ref.position(set.times[std::size_t(row.sample)]);
    CHECK(point_in_polygon(obs.contour, Vec2(p.x(), p.y())));
  }

  // Constrained fit: all rows satisfied, deviation from reference bounded.
  const SwingFit fit = fit_bezier(ref, set);
  REQUIRE(fit.status == QpStatus::Optimal);
  for (const auto& row : set.rows) {
    const Vec3 p = fit.curve.position(set.times[std::size_t(row.sample)]);
    CHECK(row.row.dot(p) >= row.rhs - 1e-9);
  }
  for (std::size_t k = 0; k < set.times.size(); ++k) {
    bool constrained = false;
    for (const auto& row : set.rows)
      if (row.sample == int(k)) constrained = true;
    if (!constrained) {
      CHECK((fit.curve.position(set.times[k]) - ref.position(set.times[k])).norm() < 0.05);
    }
  }
  // Endpoint contract survives the constraints.
  CHECK((fit.curve.position(0.0) - start).norm() < 1e-9);
  CHECK((fit.curve.position(0.6) - goal).norm() < 1e-9);
  CHECK(fit.curve.velocity(0.6).norm() < 1e-9);
}

TEST_CASE("constraints already satisfied leave the fit unchanged", "[swing]") {
  const ObstacleContour obs = step_obstacle(0.1, 0.05);
  const ReferenceTrajectory ref = reference_trajectory(
      Vec3(0, 0, 0), Vec3::Zero(), Vec3::Zero(), Vec3(0.35, 0, 0.05), 0.6, 0.25);
  const auto set = active_halfspaces(ref, {obs});
  const SwingFit constrained = fit_bezier(ref, set);
  const SwingFit free_fit = fit_bezier(ref, CollisionConstraintSet{});
  REQUIRE(constrained.status == QpStatus::Optimal);
  REQUIRE(free_fit.status == QpStatus::Optimal);
  if (set.rows.empty()) {
    for (std::size_t i = 0; i < 8; ++i)
      CHECK((constrained.curve.control_points[i] - free_fit.curve.control_points[i]).norm() <
            1e-9);
  }
}

TEST_CASE("dense resampling finds no deep halfspace violations", "[swing]") {
  const ObstacleContour obs = step_obstacle(0.1, 0.2);
  const ReferenceTrajectory ref = reference_trajectory(
      Vec3(0, 0, 0), Vec3::Zero(), Vec3::Zero(), Vec3(0.35, 0, 0.2), 0.6, 0.05);
  const auto set = active_halfspaces(ref, {obs});
  const SwingFit fit = fit_bezier(ref, set);
  REQUIRE(fit.status == QpStatus::Optimal);
  REQUIRE_FALSE(set.rows.empty());
  // 10x the constraint sampling density between the first and last constrained
  // samples: inter-sample gap bound 5 mm.
  double t_lo = 1e9, t_hi = -1e9;
  for (const auto& row : set.rows) {
    t_lo = std::min(t_lo, set.times[std::size_t(row.sample)]);
    t_hi = std::max(t_hi, set.times[std::size_t(row.sample)]);
  }
  for (int k = 0; k <= 110; ++k) {
    const double t = 0.6 * double(k) / 110.0;
    if (t < t_lo || t > t_hi) continue;
    const Vec3 p = fit.curve.position(t);
    if (!point_in_polygon(obs.contour, Vec2(p.x(), p.y()))) continue;
    CHECK(p.z() >= 0.2 - 5e-3);
  }
}
