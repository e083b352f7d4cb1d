#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>

#include "stepkit/surface.hpp"

namespace stepkit {

/// Read-only view over the terrain used for elevation queries: the processed
/// surfaces, an optional heightmap and the fallback ground height.
struct ElevationSource {
  const std::vector<Surface>* surfaces = nullptr;
  const HeightmapGrid* heightmap = nullptr;
  double default_ground_z = 0.0;
};

/// Terrain height at (x, y). Heightmap wins when present; otherwise the plane
/// height of the highest surface containing the point; otherwise the default.
inline double elevation(const ElevationSource& src, double x, double y) {
  if (src.heightmap && src.heightmap->valid()) return src.heightmap->interpolate(x, y);
  double best = -std::numeric_limits<double>::infinity();
  if (src.surfaces) {
    const Vec2 q(x, y);
    for (const Surface& s : *src.surfaces) {
      if (point_in_polygon(s.contour_xy(), q)) best = std::max(best, s.plane.height_at(q));
    }
  }
  return std::isfinite(best) ? best : src.default_ground_z;
}

/// Least squares plane through a grid of elevation samples centered on
/// `center` with size `extent` and (nx, ny) sample counts.
/// Throws DegenerateFit when the samples are collinear.
inline PlaneCoeffs fit_plane(const ElevationSource& src, const Vec2& center, const Vec2& extent,
                             int nx = 10, int ny = 10) {
  if (nx < 2 || ny < 2) throw DegenerateFit("fit_plane: resolution below 2x2");
  const long rows = long(nx) * long(ny);
  MatX A(rows, 3);
  VecX B(rows);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = center.x() - 0.5 * extent.x() + extent.x() * double(i) / double(nx - 1);
      const double y = center.y() - 0.5 * extent.y() + extent.y() * double(j) / double(ny - 1);
      const long r = long(j) * nx + i;
      A.row(r) << x, y, 1.0;
      B(r) = elevation(src, x, y);
    }
  }
  const Eigen::ColPivHouseholderQR<MatX> qr(A);
  if (qr.rank() < 3) throw DegenerateFit("fit_plane: sample matrix rank < 3");
  const VecX n = qr.solve(B);
  PlaneCoeffs p;
  p.a = n(0);
  p.b = n(1);
  p.c = n(2);
  const double max_slope = std::tan(60.0 * M_PI / 180.0);
  if (!std::isfinite(p.a) || !std::isfinite(p.b) || !std::isfinite(p.c) ||
      std::abs(p.a) >= max_slope || std::abs(p.b) >= max_slope)
    throw DegenerateFit("fit_plane: near-vertical fit");
  return p;
}

struct SegmentationConfig {
  double inner_margin = 0.04;  // shrink of walkable area [m]
  double outer_margin = 0.04;  // growth of the obstacle contour [m]
  double min_area = 0.03;      // pieces below this are dropped [m^2]
  std::size_t max_vertices = 8;
  double plane_tol = kPlaneTol;
};

/// Obstacle contour kept for swing-trajectory collision rows: the grown
/// (outer) polygon of a raw surface and its supporting plane.
struct ObstacleContour {
  Polygon2 contour;
  PlaneCoeffs plane;
};

struct SegmentationResult {
  std::vector<Surface> surfaces;
  std::vector<ObstacleContour> obstacles;
  std::vector<std::string> diagnostics;
  double dropped_area = 0.0;  // pieces removed by the min-area filter [m^2]
};

namespace detail {

struct PreparedContour {
  Polygon2 inner;
  Polygon2 outer;
  PlaneCoeffs plane;
  double mean_height = 0.0;
};

inline std::optional<PreparedContour> prepare_contour(const RawSurface& raw,
                                                      const SegmentationConfig& cfg,
                                                      std::vector<std::string>& diagnostics,
                                                      std::size_t index) {
  auto reject = [&](const std::string& why) -> std::optional<PreparedContour> {
    diagnostics.push_back("surface " + std::to_string(index) + " dropped: " + why);
    return std::nullopt;
  };
  if (raw.vertices.size() < 3) return reject("fewer than 3 vertices");
  PlaneCoeffs plane;
  try {
    plane = plane_from_polygon(raw.vertices);
  } catch (const DegenerateFit& e) {
    return reject(e.what());
  }
  const Vec3 up = plane.upward_normal();
  if (up.z() < std::cos(kQuasiFlatMaxDeg * M_PI / 180.0)) return reject("not quasi-flat");
  for (const auto& v : raw.vertices) {
    if (std::abs(plane.height_at(v.x(), v.y()) - v.z()) > 1e-6 * (1.0 + v.norm()) + 1e-6)
      return reject("vertices not coplanar");
  }
  Polygon2 contour = ensure_ccw(clean_polygon(project_xy(raw.vertices)));
  if (contour.size() < 3 || !is_simple(contour)) return reject("not a simple polygon");
  contour = simplify_contour(contour, cfg.max_vertices);

  const auto inner = offset_contour_general(contour, cfg.inner_margin);
  if (!inner) return reject("inner margin annihilates the polygon");
  const auto outer = offset_contour_general(contour, -cfg.outer_margin);
  if (!outer) return reject("outer margin failed");

  PreparedContour out;
  out.inner = *inner;
  out.outer = *outer;
  out.plane = plane;
  double z = 0.0;
  for (const auto& v : raw.vertices) z += v.z();
  out.mean_height = z / double(raw.vertices.size());
  return out;
}

}  // namespace detail

/// Surface post-processing: simplify every contour, apply inner/outer margins,
/// then walk the surfaces from lowest to highest, removing from each inner
/// contour the outer contours of every higher surface that overlaps it, and
/// convex-decompose what remains. Degenerate inputs are dropped with a
/// diagnostic record. An optional safety floor is appended untouched by the
/// overlap subtraction.
inline SegmentationResult process_surfaces(const std::vector<RawSurface>& raw,
                                           const SegmentationConfig& cfg = {},
                                           const RawSurface* safety_floor = nullptr) {
  SegmentationResult result;
  std::vector<detail::PreparedContour> prepared;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (auto p = detail::prepare_contour(raw[i], cfg, result.diagnostics, i))
      prepared.push_back(std::move(*p));
  }
  std::stable_sort(prepared.begin(), prepared.end(),
                   [](const auto& a, const auto& b) { return a.mean_height < b.mean_height; });

  int next_id = 0;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const detail::PreparedContour& cur = prepared[i];
    std::vector<Polygon2> holes;
    for (std::size_t j = i + 1; j < prepared.size(); ++j) {
      if (polygon_intersection_area(prepared[j].outer, cur.inner) > 1e-9)
        holes.push_back(prepared[j].outer);
    }
    std::vector<Polygon2> pieces;
    if (holes.empty()) {
      pieces = {cur.inner};
    } else {
      pieces = polygon_difference(cur.inner, holes);
    }
    for (const Polygon2& piece : pieces) {
      double kept = 0.0;
      for (Polygon2& part : convex_decompose(piece, cfg.min_area)) {
        kept += polygon_area(part);
        result.surfaces.push_back(make_surface(next_id++, part, cur.plane, cfg.plane_tol));
      }
      result.dropped_area += polygon_area(piece) - kept;
    }
    result.obstacles.push_back({cur.outer, cur.plane});
  }

  if (safety_floor) {
    std::vector<std::string> floor_diag;
    if (auto p = detail::prepare_contour(*safety_floor, cfg, floor_diag, raw.size())) {
      for (Polygon2& part : convex_decompose(p->inner, cfg.min_area))
        result.surfaces.push_back(make_surface(next_id++, part, p->plane, cfg.plane_tol));
    }
    result.diagnostics.insert(result.diagnostics.end(), floor_diag.begin(), floor_diag.end());
  }
  return result;
}

}  // namespace stepkit
