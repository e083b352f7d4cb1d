#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "stepkit/footstep.hpp"

using namespace stepkit;

namespace {

Surface square_surface(double cx, double cy, double half, double z, int id = 0) {
  Polygon3 v = {Vec3(cx - half, cy - half, z), Vec3(cx + half, cy - half, z),
                Vec3(cx + half, cy + half, z), Vec3(cx - half, cy + half, z)};
  return make_surface(id, v);
}

}  // namespace

TEST_CASE("raibert_target at rest returns the hip", "[footstep]") {
  RaibertParams p;
  p.v_ref = Vec2::Zero();
  p.omega_ref = 0.0;
  const Vec2 hip(0.4, -0.2);
  CHECK((raibert_target(hip, p) - hip).norm() < 1e-15);
}

TEST_CASE("raibert_target forward walk offset", "[footstep]") {
  RaibertParams p;
  p.stance_time = 0.6;
  p.v_ref = Vec2(0.1, 0.0);
  const Vec2 hip(0.0, 0.0);
  const Vec2 t = raibert_target(hip, p);
  CHECK(t.x() == Catch::Approx(0.03).margin(1e-12));
  CHECK(t.y() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("raibert_target cross term matches the formula evaluation", "[footstep]") {
  RaibertParams p;
  p.stance_time = 0.6;
  p.height = 0.48;
  p.gravity = 9.81;
  p.v_ref = Vec2(0.1, 0.0);
  p.omega_ref = 0.5;
  const Vec2 t = raibert_target(Vec2::Zero(), p);
  // v x w = (0.1,0,0) x (0,0,0.5) = (0*0.5-0, 0-0.1*0.5, 0) = (0, -0.05, 0).
  const double k = std::sqrt(0.48 / 9.81);
  CHECK(t.x() == Catch::Approx(0.03).margin(1e-12));
  CHECK(t.y() == Catch::Approx(-0.05 * k).margin(1e-12));
  CHECK(t.y() == Catch::Approx(-0.011057).margin(1e-5));
}

TEST_CASE("raibert_target is linear in velocity when not turning", "[footstep]") {
  RaibertParams p;
  p.stance_time = 0.6;
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int i = 0; i < 50; ++i) {
    const Vec2 v(u(gen), u(gen));
    const double alpha = 0.5 + std::abs(u(gen));
    RaibertParams pa = p;
    pa.v_ref = v;
    RaibertParams pb = p;
    pb.v_ref = alpha * v;
    const Vec2 da = raibert_target(Vec2::Zero(), pa);
    const Vec2 db = raibert_target(Vec2::Zero(), pb);
    CHECK((db - alpha * da).norm() < 1e-12);
  }
}

TEST_CASE("optimize_footstep keeps an interior target", "[footstep]") {
  const Surface s = square_surface(0.0, 0.0, 0.5, 0.17);
  const Vec3 hip(0.1, 0.0, 0.17 + 0.48);
  const QpSolution sol = optimize_footstep(Vec2(0.1, 0.05), s, KinematicBox{}, hip, 0.0);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x(0) == Catch::Approx(0.1).margin(1e-9));
  CHECK(sol.x(1) == Catch::Approx(0.05).margin(1e-9));
  CHECK(sol.x(2) == Catch::Approx(0.17).margin(1e-9));
}

TEST_CASE("optimize_footstep projects onto the nearest edge", "[footstep]") {
  const Surface s = square_surface(0.0, 0.0, 0.5, 0.0);
  const Vec3 hip(0.45, 0.0, 0.48);
  KinematicBox box;
  box.upper.x() = 0.5;  // keep the box inactive for this case
  const QpSolution sol = optimize_footstep(Vec2(0.7, 0.1), s, box, hip, 0.0);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.x(0) == Catch::Approx(0.5).margin(1e-9));
  CHECK(sol.x(1) == Catch::Approx(0.1).margin(1e-9));
  CHECK(((s.S * sol.x - s.s).array() <= 1e-8).all());
}

TEST_CASE("optimize_footstep matches a grid-search oracle at corners", "[footstep][oracle]") {
  const Surface s = square_surface(0.0, 0.0, 0.5, 0.0);
  KinematicBox box;
  const Vec3 hip(0.35, 0.35, 0.48);
  const Vec2 target(0.8, 0.8);  // outside the corner, box also active
  const QpSolution sol = optimize_footstep(target, s, box, hip, 0.0);
  REQUIRE(sol.status == QpStatus::Optimal);

  // 1 mm grid over the surface, keeping only points inside the box.
  double best = std::numeric_limits<double>::infinity();
  Vec2 best_p;
  for (double x = -0.5; x <= 0.5 + 1e-12; x += 0.001) {
    for (double y = -0.5; y <= 0.5 + 1e-12; y += 0.001) {
      if (x < hip.x() + box.lower.x() || x > hip.x() + box.upper.x()) continue;
      if (y < hip.y() + box.lower.y() || y > hip.y() + box.upper.y()) continue;
      const double d = (Vec2(x, y) - target).squaredNorm();
      if (d < best) {
        best = d;
        best_p = Vec2(x, y);
      }
    }
  }
  CHECK((Vec2(sol.x(0), sol.x(1)) - best_p).norm() < 2e-3);
  CHECK((Vec2(sol.x(0), sol.x(1)) - target).squaredNorm() <= best + 1e-6);
}

TEST_CASE("optimize_footstep is idempotent on xy", "[footstep]") {
  const Surface s = square_surface(0.0, 0.0, 0.5, 0.1);
  const Vec3 hip(0.2, 0.1, 0.58);
  std::mt19937 gen(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Vec2 target(u(gen), u(gen));
    const QpSolution first = optimize_footstep(target, s, KinematicBox{}, hip, 0.0);
    if (first.status != QpStatus::Optimal) continue;
    const QpSolution second =
        optimize_footstep(Vec2(first.x(0), first.x(1)), s, KinematicBox{}, hip, 0.0);
    REQUIRE(second.status == QpStatus::Optimal);
    CHECK((second.x - first.x).norm() < 1e-8);
  }
}

TEST_CASE("optimize_footstep reports infeasible when surface and box are disjoint",
          "[footstep]") {
  const Surface s = square_surface(3.0, 0.0, 0.2, 0.0);
  const Vec3 hip(0.0, 0.0, 0.48);
  const QpSolution sol = optimize_footstep(Vec2(3.0, 0.0), s, KinematicBox{}, hip, 0.0);
  CHECK(sol.status == QpStatus::Infeasible);
}

TEST_CASE("projection optimality against the grid oracle on random cases",
          "[footstep][oracle]") {
  std::mt19937 gen(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double half = 0.2 + 0.3 * std::abs(u(gen));
    const Surface s = square_surface(0.3 * u(gen), 0.3 * u(gen), half, 0.1 * u(gen));
    const Vec3 hip(0.3 * u(gen), 0.3 * u(gen), 0.48);
    const Vec2 target(u(gen), u(gen));
    const QpSolution sol = optimize_footstep(target, s, KinematicBox{}, hip, 0.0);
    if (sol.status != QpStatus::Optimal) continue;
    ++checked;
    // Coarse 2 mm grid bound: QP objective must not exceed the grid's best.
    double best = std::numeric_limits<double>::infinity();
    const Polygon2 xy = s.contour_xy();
    for (double x = -1.0; x <= 1.0; x += 0.002)
      for (double y = -1.0; y <= 1.0; y += 0.002) {
        if (!point_in_polygon(xy, Vec2(x, y))) continue;
        if (x < hip.x() + KinematicBox{}.lower.x() || x > hip.x() + KinematicBox{}.upper.x())
          continue;
        if (y < hip.y() + KinematicBox{}.lower.y() || y > hip.y() + KinematicBox{}.upper.y())
          continue;
        best = std::min(best, (Vec2(x, y) - target).squaredNorm());
      }
    if (!std::isfinite(best)) continue;
    CHECK((Vec2(sol.x(0), sol.x(1)) - target).squaredNorm() <= best + 1e-6);
  }
  CHECK(checked > 100);
}
