#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "stepkit/terrain.hpp"

using namespace stepkit;

namespace {

RawSurface raw_rect(double cx, double cy, double w, double h, double z) {
  RawSurface s;
  s.vertices = {Vec3(cx - w / 2, cy - h / 2, z), Vec3(cx + w / 2, cy - h / 2, z),
                Vec3(cx + w / 2, cy + h / 2, z), Vec3(cx - w / 2, cy + h / 2, z)};
  return s;
}

}  // namespace

TEST_CASE("fit_plane recovers constant and linear fields", "[terrain]") {
  std::vector<Surface> flat = {make_surface(0, raw_rect(0, 0, 20, 20, 0.2).vertices)};
  ElevationSource src{&flat, nullptr, 0.0};
  const PlaneCoeffs c = fit_plane(src, Vec2(0.3, -0.2), Vec2(1.0, 1.0));
  CHECK(c.a == Catch::Approx(0.0).margin(1e-9));
  CHECK(c.b == Catch::Approx(0.0).margin(1e-9));
  CHECK(c.c == Catch::Approx(0.2).margin(1e-9));

  // Ramp z = 0.5 x, window centered at origin.
  RawSurface ramp;
  ramp.vertices = {Vec3(-10, -10, -5), Vec3(10, -10, 5), Vec3(10, 10, 5), Vec3(-10, 10, -5)};
  std::vector<Surface> ramp_s = {make_surface(0, ramp.vertices)};
  ElevationSource src2{&ramp_s, nullptr, 0.0};
  const PlaneCoeffs r = fit_plane(src2, Vec2(0, 0), Vec2(2.0, 2.0));
  CHECK(r.a == Catch::Approx(0.5).margin(1e-9));
  CHECK(r.b == Catch::Approx(0.0).margin(1e-9));
  CHECK(r.c == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("fit_plane matches an independent least-squares solve under noise", "[terrain]") {
  // 10x10 samples of z = 0.1x + 0.3y + 0.05 with centered noise, via heightmap.
  HeightmapGrid grid;
  grid.origin = Vec2(-0.5, -0.5);
  grid.resolution = 1.0 / 9.0;
  grid.nx = 10;
  grid.ny = 10;
  std::mt19937 gen(99);
  std::uniform_real_distribution<double> noise(-1e-3, 1e-3);
  grid.data.resize(100);
  for (int j = 0; j < 10; ++j)
    for (int i = 0; i < 10; ++i) {
      const double x = grid.origin.x() + i * grid.resolution;
      const double y = grid.origin.y() + j * grid.resolution;
      grid.data[std::size_t(j) * 10 + i] = 0.1 * x + 0.3 * y + 0.05 + noise(gen);
    }
  ElevationSource src{nullptr, &grid, 0.0};
  const PlaneCoeffs c = fit_plane(src, Vec2(0, 0), Vec2(1.0, 1.0), 10, 10);
  CHECK(std::abs(c.a - 0.1) < 1e-2);
  CHECK(std::abs(c.b - 0.3) < 1e-2);
  CHECK(std::abs(c.c - 0.05) < 1e-2);

  // Normal equations residual against a generic dense solve.
  MatX A(100, 3);
  VecX B(100);
  for (int j = 0; j < 10; ++j)
    for (int i = 0; i < 10; ++i) {
      const double x = -0.5 + i / 9.0;
      const double y = -0.5 + j / 9.0;
      A.row(j * 10 + i) << x, y, 1.0;
      B(j * 10 + i) = grid.interpolate(x, y);
    }
  const Eigen::Vector3d ref = (A.transpose() * A).ldlt().solve(A.transpose() * B);
  CHECK(std::abs(c.a - ref(0)) < 1e-8);
  CHECK(std::abs(c.b - ref(1)) < 1e-8);
  CHECK(std::abs(c.c - ref(2)) < 1e-8);
}

TEST_CASE("fit_plane rejects rank-deficient samples", "[terrain]") {
  std::vector<Surface> flat = {make_surface(0, raw_rect(0, 0, 20, 20, 0.0).vertices)};
  ElevationSource src{&flat, nullptr, 0.0};
  CHECK_THROWS_AS(fit_plane(src, Vec2(0, 0), Vec2(1.0, 0.0), 10, 10), DegenerateFit);
}

TEST_CASE("elevation picks the highest covering surface", "[terrain]") {
  std::vector<Surface> s;
  s.push_back(make_surface(0, raw_rect(0, 0, 2, 2, 0.0).vertices));
  ElevationSource one{&s, nullptr, 0.0};
  CHECK(elevation(one, 0.1, 0.1) == Catch::Approx(0.0).margin(1e-12));

  s.push_back(make_surface(1, raw_rect(0, 0, 1, 1, 0.17).vertices));
  ElevationSource two{&s, nullptr, 0.0};
  CHECK(elevation(two, 0.1, 0.1) == Catch::Approx(0.17).margin(1e-12));
  CHECK(elevation(two, 0.9, 0.9) == Catch::Approx(0.0).margin(1e-12));
  // Outside everything: default.
  ElevationSource def{&s, nullptr, -0.3};
  CHECK(elevation(def, 5.0, 5.0) == Catch::Approx(-0.3));
}

TEST_CASE("heightmap bilinear interpolation", "[terrain]") {
  HeightmapGrid grid;
  grid.origin = Vec2(0, 0);
  grid.resolution = 1.0;
  grid.nx = 2;
  grid.ny = 2;
  grid.data = {0.0, 0.0, 1.0, 1.0};  // corners (0,0,1,1) along y
  ElevationSource src{nullptr, &grid, 0.0};
  CHECK(elevation(src, 0.5, 0.5) == Catch::Approx(0.5));
  CHECK(elevation(src, 0.25, 0.0) == Catch::Approx(0.0));
  CHECK(elevation(src, 0.0, 1.0) == Catch::Approx(1.0));
}

TEST_CASE("surface halfspaces contain the polygon and reject outside points", "[terrain]") {
  std::mt19937 gen(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Surface s = make_surface(0, raw_rect(0.3, -0.2, 1.4, 0.9, 0.25).vertices);
  REQUIRE(s.S.rows() <= 10);
  for (const auto& v : s.vertices) CHECK(((s.S * v - s.s).array() <= 1e-9).all());
  const Polygon2 xy = s.contour_xy();
  for (int i = 0; i < 500; ++i) {
    const Vec2 q(0.3 + 0.7 * u(gen), -0.2 + 0.45 * u(gen));
    if (!point_in_polygon(xy, q)) continue;
    const Vec3 p(q.x(), q.y(), s.plane.height_at(q));
    CHECK(s.contains(p, 1e-9));
  }
  // 1 cm outside each edge violates at least one row.
  for (std::size_t i = 0; i < xy.size(); ++i) {
    const Vec2 a = xy[i];
    const Vec2 b = xy[(i + 1) % xy.size()];
    const Vec2 mid = 0.5 * (a + b);
    const Vec2 n = Vec2((b - a).y(), -(b - a).x()).normalized();
    const Vec2 out = mid + 0.01 * n;
    const Vec3 p(out.x(), out.y(), s.plane.height_at(out));
    CHECK_FALSE(s.contains(p, 1e-9));
  }
  // Same for points off the plane.
  const Vec3 above(0.3, -0.2, 0.25 + 0.05);
  CHECK_FALSE(s.contains(above, 1e-9));
}

TEST_CASE("process_surfaces keeps a single flat square", "[terrain]") {
  SegmentationConfig cfg;
  const auto result = process_surfaces({raw_rect(0, 0, 1, 1, 0.0)}, cfg);
  REQUIRE(result.surfaces.size() == 1);
  CHECK(polygon_area(result.surfaces[0].contour_xy()) ==
        Catch::Approx(0.92 * 0.92).margin(1e-9));
  CHECK(result.obstacles.size() == 1);
  CHECK(polygon_area(result.obstacles[0].contour) == Catch::Approx(1.08 * 1.08).margin(1e-9));
}

TEST_CASE("process_surfaces subtracts a block's outer contour from the ground", "[terrain]") {
  SegmentationConfig cfg;
  const auto result =
      process_surfaces({raw_rect(0, 0, 2, 2, 0.0), raw_rect(0, 0, 0.5, 0.5, 0.2)}, cfg);
  // Block inner contour survives.
  double block_area = 0.0;
  double ground_area = 0.0;
  for (const auto& s : result.surfaces) {
    if (s.mean_height() > 0.1) {
      block_area += polygon_area(s.contour_xy());
    } else {
      ground_area += polygon_area(s.contour_xy());
    }
  }
  CHECK(block_area == Catch::Approx(0.42 * 0.42).margin(1e-9));
  // Ground = inner 1.92^2 minus the block's OUTER contour 0.58^2.
  CHECK(ground_area == Catch::Approx(1.92 * 1.92 - 0.58 * 0.58).epsilon(1e-6));
  // Ground pieces must not intersect the outer contour of the block.
  const Polygon2 outer = result.obstacles[1].contour;
  for (const auto& s : result.surfaces) {
    if (s.mean_height() < 0.1) {
      CHECK(polygon_intersection_area(s.contour_xy(), outer) < 1e-9);
    }
    CHECK(oracles::convex_by_cross_products(s.contour_xy()));
    CHECK(s.vertices.size() <= 8);
  }
}

TEST_CASE("process_surfaces passes disjoint staircase treads through", "[terrain]") {
  std::vector<RawSurface> raw;
  for (int i = 1; i <= 7; ++i)
    raw.push_back(raw_rect(0.145 + 0.29 * (i - 1), 0.0, 0.29, 1.2, 0.17 * i));
  const auto result = process_surfaces(raw);
  REQUIRE(result.surfaces.size() == 7);
  for (const auto& s : result.surfaces) {
    CHECK(polygon_area(s.contour_xy()) == Catch::Approx(0.21 * 1.12).margin(1e-9));
  }
  // Ascending id by height (processing order is lowest first).
  for (std::size_t i = 1; i < result.surfaces.size(); ++i)
    CHECK(result.surfaces[i].mean_height() > result.surfaces[i - 1].mean_height());
}

TEST_CASE("process_surfaces drops degenerate inputs with diagnostics", "[terrain]") {
  RawSurface bad;
  bad.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  RawSurface wall;  // vertical plane: not quasi-flat
  wall.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 1), Vec3(0, 0, 1)};
  const auto result = process_surfaces({bad, wall, raw_rect(0, 0, 1, 1, 0)});
  CHECK(result.surfaces.size() == 1);
  CHECK(result.diagnostics.size() == 2);
}

TEST_CASE("process_surfaces area conservation on random overlapping scenes", "[terrain]") {
  std::mt19937 gen(31);
  std::uniform_real_distribution<double> pos(-1.0, 1.0);
  std::uniform_real_distribution<double> size(0.4, 1.2);
  std::uniform_real_distribution<double> height(0.0, 0.5);
  for (int scene = 0; scene < 20; ++scene) {
    std::vector<RawSurface> raw;
    const int n = 2 + scene % 4;
    for (int i = 0; i < n; ++i)
      raw.push_back(raw_rect(pos(gen), pos(gen), size(gen), size(gen), height(gen)));
    SegmentationConfig cfg;
    const auto result = process_surfaces(raw, cfg);
    for (const auto& s : result.surfaces) {
      CHECK(oracles::convex_by_cross_products(s.contour_xy()));
      CHECK(polygon_area(s.contour_xy()) >= cfg.min_area - 1e-9);
      CHECK(s.vertices.size() <= 8);
    }
    // Pairwise xy-disjoint.
    for (std::size_t i = 0; i < result.surfaces.size(); ++i)
      for (std::size_t j = i + 1; j < result.surfaces.size(); ++j)
        CHECK(polygon_intersection_area(result.surfaces[i].contour_xy(),
                                        result.surfaces[j].contour_xy()) < 1e-9);
  }
}

TEST_CASE("area deficit equals subtracted overlap plus dropped pieces", "[terrain]") {
  // Staggered heights with mutually disjoint upper blocks, so the overlap of
  // each inner contour with the union of higher outers is a plain sum.
  std::mt19937 gen(59);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int scene = 0; scene < 15; ++scene) {
    std::vector<RawSurface> raw;
    raw.push_back(raw_rect(0, 0, 2.4 + 0.4 * u(gen), 2.4, 0.0));
    const int blocks = 1 + scene % 3;
    for (int b = 0; b < blocks; ++b) {
      raw.push_back(raw_rect(-0.7 + 1.1 * b, 0.4 * u(gen) - 0.2, 0.4 + 0.2 * u(gen),
                             0.4 + 0.2 * u(gen), 0.2 + 0.1 * b));
    }
    SegmentationConfig cfg;
    const auto result = process_surfaces(raw, cfg);

    double inner_total = 0.0;
    double overlap_total = 0.0;
    std::vector<Polygon2> inners, outers;
    std::vector<double> heights;
    for (const auto& rs : raw) {
      Polygon2 contour = ensure_ccw(clean_polygon(project_xy(rs.vertices)));
      contour = simplify_contour(contour, cfg.max_vertices);
      inners.push_back(*offset_contour_general(contour, cfg.inner_margin));
      outers.push_back(*offset_contour_general(contour, -cfg.outer_margin));
      heights.push_back(rs.vertices[0].z());
      inner_total += polygon_area(inners.back());
    }
    for (std::size_t i = 0; i < raw.size(); ++i)
      for (std::size_t h = 0; h < raw.size(); ++h)
        if (heights[h] > heights[i])
          overlap_total += polygon_intersection_area(inners[i], outers[h]);

    double out_total = 0.0;
    for (const auto& s : result.surfaces) out_total += polygon_area(s.contour_xy());
    const double deficit = inner_total - out_total;
    CHECK(deficit == Catch::Approx(overlap_total + result.dropped_area)
                         .epsilon(1e-6)
                         .margin(1e-9));
  }
}
