#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include "stepkit/geometry.hpp"
#include "stepkit/types.hpp"

namespace stepkit {

inline constexpr double kPlaneTol = 1e-3;       // half thickness of the surface slab [m]
inline constexpr double kQuasiFlatMaxDeg = 45;  // max tilt of a walkable plane

/// Plane a*x + b*y - z + c = 0, i.e. z = a*x + b*y + c.
struct PlaneCoeffs {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double height_at(double x, double y) const { return a * x + b * y + c; }
  double height_at(const Vec2& p) const { return height_at(p.x(), p.y()); }
  Vec3 upward_normal() const { return Vec3(-a, -b, 1.0).normalized(); }
};

/// Raw terrain polygon straight from segmentation: coplanar vertices,
/// counter-clockwise when viewed along the plane's upward normal.
struct RawSurface {
  Polygon3 vertices;
};

namespace detail {

inline Vec3 newell_normal(const Polygon3& v) {
  Vec3 n = Vec3::Zero();
  const std::size_t m = v.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3& p = v[i];
    const Vec3& q = v[(i + 1) % m];
    n.x() += (p.y() - q.y()) * (p.z() + q.z());
    n.y() += (p.z() - q.z()) * (p.x() + q.x());
    n.z() += (p.x() - q.x()) * (p.y() + q.y());
  }
  return n;
}

}  // namespace detail

/// Best-fit plane of a (near) planar 3D polygon. Throws DegenerateFit when the
/// polygon is degenerate or near vertical.
inline PlaneCoeffs plane_from_polygon(const Polygon3& vertices) {
  if (vertices.size() < 3) throw DegenerateFit("plane_from_polygon: fewer than 3 vertices");
  Vec3 n = detail::newell_normal(vertices);
  const double nn = n.norm();
  if (nn < 1e-12) throw DegenerateFit("plane_from_polygon: degenerate polygon");
  n /= nn;
  if (n.z() < 0.0) n = -n;
  if (std::abs(n.z()) < 1e-6) throw DegenerateFit("plane_from_polygon: vertical polygon");
  Vec3 centroid = Vec3::Zero();
  for (const auto& v : vertices) centroid += v;
  centroid /= double(vertices.size());
  PlaneCoeffs p;
  p.a = -n.x() / n.z();
  p.b = -n.y() / n.z();
  p.c = centroid.z() - p.a * centroid.x() - p.b * centroid.y();
  return p;
}

inline Polygon2 project_xy(const Polygon3& vertices) {
  Polygon2 out;
  out.reserve(vertices.size());
  for (const auto& v : vertices) out.emplace_back(v.x(), v.y());
  return out;
}

inline Polygon3 lift_to_plane(const Polygon2& contour, const PlaneCoeffs& plane) {
  Polygon3 out;
  out.reserve(contour.size());
  for (const auto& v : contour) out.emplace_back(v.x(), v.y(), plane.height_at(v));
  return out;
}

/// Convex contact surface: polygon embedded in a 3D plane together with its
/// half-space representation {p | S p <= s}. The rows are the polygon edges
/// extruded vertically plus two slabs of half thickness plane_tol around the
/// supporting plane.
struct Surface {
  int id = -1;
  Polygon3 vertices;
  PlaneCoeffs plane;
  MatX S;
  VecX s;

  Polygon2 contour_xy() const { return project_xy(vertices); }
  double mean_height() const {
    double z = 0.0;
    for (const auto& v : vertices) z += v.z();
    return vertices.empty() ? 0.0 : z / double(vertices.size());
  }
  bool contains(const Vec3& p, double tol = 1e-9) const {
    return ((S * p - s).array() <= tol).all();
  }
};

/// Build the Eq-style half-space description from a convex ccw contour.
inline Surface make_surface(int id, const Polygon2& contour, const PlaneCoeffs& plane,
                            double plane_tol = kPlaneTol) {
  Polygon2 c = ensure_ccw(clean_polygon(contour));
  const std::size_t n = c.size();
  Surface surf;
  surf.id = id;
  surf.plane = plane;
  surf.vertices = lift_to_plane(c, plane);
  surf.S.resize(long(n) + 2, 3);
  surf.s.resize(long(n) + 2);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = c[(i + 1) % n] - c[i];
    const Vec2 nrm = Vec2(e.y(), -e.x()).normalized();  // outward, vertical face
    surf.S.row(long(i)) << nrm.x(), nrm.y(), 0.0;
    surf.s(long(i)) = nrm.dot(c[i]);
  }
  const Vec3 up = plane.upward_normal();
  const double offset = up.dot(surf.vertices.front());
  surf.S.row(long(n)) = up.transpose();
  surf.s(long(n)) = offset + plane_tol;
  surf.S.row(long(n) + 1) = -up.transpose();
  surf.s(long(n) + 1) = -offset + plane_tol;
  return surf;
}

inline Surface make_surface(int id, const Polygon3& vertices, double plane_tol = kPlaneTol) {
  const PlaneCoeffs plane = plane_from_polygon(vertices);
  return make_surface(id, project_xy(vertices), plane, plane_tol);
}

/// 2.5D elevation grid, row-major with data[iy * nx + ix].
struct HeightmapGrid {
  Vec2 origin = Vec2::Zero();
  double resolution = 0.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> data;

  bool valid() const {
    if (nx < 2 || ny < 2 || resolution <= 0.0) return false;
    if (data.size() != std::size_t(nx) * std::size_t(ny)) return false;
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double at(int ix, int iy) const { return data[std::size_t(iy) * std::size_t(nx) + ix]; }

  /// Bilinear interpolation, clamped to the grid border.
  double interpolate(double x, double y) const {
    const double gx = std::clamp((x - origin.x()) / resolution, 0.0, double(nx - 1));
    const double gy = std::clamp((y - origin.y()) / resolution, 0.0, double(ny - 1));
    const int ix = std::min(int(gx), nx - 2);
    const int iy = std::min(int(gy), ny - 2);
    const double fx = gx - ix;
    const double fy = gy - iy;
    const double z00 = at(ix, iy), z10 = at(ix + 1, iy);
    const double z01 = at(ix, iy + 1), z11 = at(ix + 1, iy + 1);
    return (1 - fx) * (1 - fy) * z00 + fx * (1 - fy) * z10 + (1 - fx) * fy * z01 + fx * fy * z11;
  }
};

}  // namespace stepkit
