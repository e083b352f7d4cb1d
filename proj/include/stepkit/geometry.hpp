#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "stepkit/types.hpp"

namespace stepkit {

inline constexpr double kGeomEps = 1e-9;
inline constexpr double kAreaEps = 1e-12;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Signed area, positive for counter-clockwise vertex order.
inline double signed_area(const Polygon2& p) {
  double s = 0.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) s += cross2(p[i], p[(i + 1) % n]);
  return 0.5 * s;
}

inline double polygon_area(const Polygon2& p) { return std::abs(signed_area(p)); }

inline Vec2 polygon_centroid(const Polygon2& p) {
  const std::size_t n = p.size();
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = cross2(p[i], p[(i + 1) % n]);
    a += w;
    c += w * (p[i] + p[(i + 1) % n]);
  }
  if (std::abs(a) < kAreaEps) {
    c = Vec2::Zero();
    for (const auto& v : p) c += v;
    return p.empty() ? c : Vec2(c / double(p.size()));
  }
  return c / (3.0 * a);
}

inline Polygon2 ensure_ccw(Polygon2 p) {
  if (signed_area(p) < 0.0) std::reverse(p.begin(), p.end());
  return p;
}

/// Drop consecutive duplicates and collinear mid-vertices.
inline Polygon2 clean_polygon(const Polygon2& p, double eps = kGeomEps) {
  Polygon2 out;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.empty() && (p[i] - out.back()).norm() <= eps) continue;
    out.push_back(p[i]);
  }
  while (out.size() >= 2 && (out.front() - out.back()).norm() <= eps) out.pop_back();
  bool removed = true;
  while (removed && out.size() > 3) {
    removed = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Vec2& a = out[(i + out.size() - 1) % out.size()];
      const Vec2& b = out[i];
      const Vec2& c = out[(i + 1) % out.size()];
      if (std::abs(cross2(b - a, c - b)) <= kAreaEps * 2.0 + eps * (c - a).norm()) {
        out.erase(out.begin() + long(i));
        removed = true;
        break;
      }
    }
  }
  return out;
}

inline bool is_convex(const Polygon2& p, double eps = kGeomEps) {
  const std::size_t n = p.size();
  if (n < 3) return false;
  double sign = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = p[(i + 1) % n] - p[i];
    const Vec2 e1 = p[(i + 2) % n] - p[(i + 1) % n];
    const double c = cross2(e0, e1);
    if (std::abs(c) <= eps) continue;
    if (sign == 0.0) {
      sign = c;
    } else if (sign * c < 0.0) {
      return false;
    }
  }
  return true;
}

namespace detail {

inline int orient_sign(const Vec2& a, const Vec2& b, const Vec2& c, double eps) {
  const double v = cross2(b - a, c - a);
  if (v > eps) return 1;
  if (v < -eps) return -1;
  return 0;
}

inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p, double eps) {
  if (std::abs(cross2(b - a, p - a)) > eps * (1.0 + (b - a).norm())) return false;
  const double t = (p - a).dot(b - a);
  return t >= -eps && t <= (b - a).squaredNorm() + eps;
}

inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d,
                               double eps) {
  const int o1 = orient_sign(a, b, c, eps);
  const int o2 = orient_sign(a, b, d, eps);
  const int o3 = orient_sign(c, d, a, eps);
  const int o4 = orient_sign(c, d, b, eps);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  if (o1 == 0 && on_segment(a, b, c, eps)) return true;
  if (o2 == 0 && on_segment(a, b, d, eps)) return true;
  if (o3 == 0 && on_segment(c, d, a, eps)) return true;
  if (o4 == 0 && on_segment(c, d, b, eps)) return true;
  return false;
}

}  // namespace detail

/// No two non-adjacent edges intersect.
inline bool is_simple(const Polygon2& p, double eps = kGeomEps) {
  const std::size_t n = p.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (detail::segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n], eps))
        return false;
    }
  }
  return true;
}

/// Boundary counts as inside.
inline bool point_in_polygon(const Polygon2& poly, const Vec2& q, double eps = kGeomEps) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (detail::on_segment(poly[i], poly[(i + 1) % n], q, eps)) return true;
  }
  bool in = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y())) {
      const double x = a.x() + (q.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (q.x() < x) in = !in;
    }
  }
  return in;
}

inline double distance_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double l2 = ab.squaredNorm();
  if (l2 < kAreaEps) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / l2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

inline double distance_point_polygon_boundary(const Polygon2& poly, const Vec2& q) {
  double d = std::numeric_limits<double>::infinity();
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i)
    d = std::min(d, distance_point_segment(q, poly[i], poly[(i + 1) % n]));
  return d;
}

/// Andrew monotone chain; output is counter-clockwise.
inline Polygon2 convex_hull(Polygon2 pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return (a - b).norm() <= kGeomEps; }),
            pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  Polygon2 h(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= kAreaEps) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= kAreaEps) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

/// Keep the part of `poly` with n.p <= d (Sutherland-Hodgman step).
inline Polygon2 clip_halfplane(const Polygon2& poly, const Vec2& n, double d,
                               double eps = kGeomEps) {
  Polygon2 out;
  const std::size_t m = poly.size();
  if (m == 0) return out;
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % m];
    const double da = n.dot(a) - d;
    const double db = n.dot(b) - d;
    const bool ia = da <= eps;
    const bool ib = db <= eps;
    if (ia) out.push_back(a);
    if (ia != ib && std::abs(da - db) > kAreaEps) {
      const double t = da / (da - db);
      out.push_back(a + t * (b - a));
    }
  }
  return out;
}

/// Intersection of two convex polygons.
inline Polygon2 clip_convex(const Polygon2& subject, const Polygon2& clipper) {
  Polygon2 out = subject;
  const Polygon2 c = ensure_ccw(clipper);
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < n && out.size() >= 3; ++i) {
    const Vec2 e = c[(i + 1) % n] - c[i];
    const Vec2 nrm(e.y(), -e.x());  // outward for ccw
    out = clip_halfplane(out, nrm, nrm.dot(c[i]));
  }
  return clean_polygon(out);
}

namespace detail {

inline bool point_in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c,
                              double eps) {
  const double d1 = cross2(b - a, p - a);
  const double d2 = cross2(c - b, p - b);
  const double d3 = cross2(a - c, p - c);
  const bool neg = (d1 < -eps) || (d2 < -eps) || (d3 < -eps);
  const bool pos = (d1 > eps) || (d2 > eps) || (d3 > eps);
  return !(neg && pos);
}

}  // namespace detail

/// Ear-clipping triangulation of a simple polygon.
inline std::vector<Polygon2> triangulate(const Polygon2& polygon) {
  Polygon2 p = ensure_ccw(clean_polygon(polygon));
  std::vector<Polygon2> tris;
  if (p.size() < 3) return tris;
  std::vector<std::size_t> idx(p.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  std::size_t guard = 0;
  const std::size_t max_guard = 4 * p.size() * p.size() + 16;
  while (idx.size() > 3 && guard++ < max_guard) {
    bool clipped = false;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::size_t k0 = (k + idx.size() - 1) % idx.size();
      const std::size_t k1 = (k + 1) % idx.size();
      const Vec2& a = p[idx[k0]];
      const Vec2& b = p[idx[k]];
      const Vec2& c = p[idx[k1]];
      const double turn = cross2(b - a, c - b);
      if (turn <= kAreaEps) continue;  // reflex or flat
      bool ear = true;
      for (std::size_t m = 0; m < idx.size(); ++m) {
        if (m == k0 || m == k || m == k1) continue;
        if (detail::point_in_triangle(p[idx[m]], a, b, c, -kGeomEps)) {
          ear = false;
          break;
        }
      }
      if (!ear) continue;
      tris.push_back({a, b, c});
      idx.erase(idx.begin() + long(k));
      clipped = true;
      break;
    }
    if (!clipped) {
      // Numerical stalemate: drop the vertex with the smallest |triangle area|.
      std::size_t best = 0;
      double best_a = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const Vec2& a = p[idx[(k + idx.size() - 1) % idx.size()]];
        const Vec2& b = p[idx[k]];
        const Vec2& c = p[idx[(k + 1) % idx.size()]];
        const double ar = std::abs(cross2(b - a, c - b));
        if (ar < best_a) {
          best_a = ar;
          best = k;
        }
      }
      idx.erase(idx.begin() + long(best));
    }
  }
  if (idx.size() == 3) {
    Polygon2 t = {p[idx[0]], p[idx[1]], p[idx[2]]};
    if (polygon_area(t) > kAreaEps) tris.push_back(std::move(t));
  }
  return tris;
}

/// piece \ clip for convex operands, as disjoint convex parts.
inline std::vector<Polygon2> subtract_convex(const Polygon2& piece, const Polygon2& clip,
                                             double area_tol = 1e-10) {
  std::vector<Polygon2> out;
  const Polygon2 c = ensure_ccw(clip);
  Polygon2 rem = piece;
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < n && rem.size() >= 3; ++i) {
    const Vec2 e = c[(i + 1) % n] - c[i];
    const double len = e.norm();
    if (len <= kGeomEps) continue;
    const Vec2 nrm = Vec2(e.y(), -e.x()) / len;
    const double d = nrm.dot(c[i]);
    Polygon2 outside = clean_polygon(clip_halfplane(rem, -nrm, -d));
    if (outside.size() >= 3 && polygon_area(outside) > area_tol) out.push_back(std::move(outside));
    rem = clip_halfplane(rem, nrm, d);
  }
  return out;
}

namespace detail {

inline std::optional<Polygon2> try_merge_convex(const Polygon2& a, const Polygon2& b,
                                                double eps = 1e-7) {
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  for (std::size_t i = 0; i < na; ++i) {
    const Vec2& u0 = a[i];
    const Vec2& u1 = a[(i + 1) % na];
    for (std::size_t j = 0; j < nb; ++j) {
      if ((b[j] - u1).norm() > eps || (b[(j + 1) % nb] - u0).norm() > eps) continue;
      // Shared edge u0->u1 in a equals reversed edge in b; stitch the cycles.
      Polygon2 merged;
      for (std::size_t k = 0; k < na; ++k) merged.push_back(a[(i + 1 + k) % na]);
      for (std::size_t k = 2; k < nb; ++k) merged.push_back(b[(j + k) % nb]);
      merged = clean_polygon(merged);
      if (merged.size() >= 3 && is_convex(merged, 1e-10) && signed_area(merged) > 0.0)
        return merged;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Greedy Hertel-Mehlhorn style pass: drop internal edges while every piece stays convex.
inline void merge_convex_pieces(std::vector<Polygon2>& pieces) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < pieces.size() && !changed; ++i) {
      for (std::size_t j = i + 1; j < pieces.size() && !changed; ++j) {
        if (auto m = detail::try_merge_convex(pieces[i], pieces[j])) {
          pieces[i] = std::move(*m);
          pieces.erase(pieces.begin() + long(j));
          changed = true;
        }
      }
    }
  }
}

/// Closure of base minus the union of holes, as disjoint simple (convex) parts.
inline std::vector<Polygon2> polygon_difference(const Polygon2& base,
                                                const std::vector<Polygon2>& holes,
                                                double area_tol = 1e-10) {
  std::vector<Polygon2> pieces;
  const Polygon2 b = ensure_ccw(clean_polygon(base));
  if (b.size() < 3) return pieces;
  if (is_convex(b)) {
    pieces.push_back(b);
  } else {
    pieces = triangulate(b);
  }
  for (const Polygon2& hole : holes) {
    const Polygon2 h = ensure_ccw(clean_polygon(hole));
    if (h.size() < 3) continue;
    std::vector<Polygon2> hole_parts;
    if (is_convex(h)) {
      hole_parts.push_back(h);
    } else {
      hole_parts = triangulate(h);
    }
    for (const Polygon2& hp : hole_parts) {
      std::vector<Polygon2> next;
      for (const Polygon2& piece : pieces) {
        auto sub = subtract_convex(piece, hp, area_tol);
        next.insert(next.end(), sub.begin(), sub.end());
      }
      pieces = std::move(next);
    }
  }
  merge_convex_pieces(pieces);
  return pieces;
}

/// Area of A 'intersect' B for simple polygons.
inline double polygon_intersection_area(const Polygon2& a, const Polygon2& b) {
  const Polygon2 pa = ensure_ccw(clean_polygon(a));
  const Polygon2 pb = ensure_ccw(clean_polygon(b));
  if (pa.size() < 3 || pb.size() < 3) return 0.0;
  const auto ta = is_convex(pa) ? std::vector<Polygon2>{pa} : triangulate(pa);
  const auto tb = is_convex(pb) ? std::vector<Polygon2>{pb} : triangulate(pb);
  double area = 0.0;
  for (const auto& x : ta)
    for (const auto& y : tb) area += polygon_area(clip_convex(x, y));
  return area;
}

/// Visvalingam-Whyatt: repeatedly remove the vertex spanning the smallest
/// triangle with its neighbours (ties: lowest index) until n_max remain.
inline Polygon2 simplify_contour(const Polygon2& polygon, std::size_t n_max) {
  Polygon2 p = polygon;
  if (n_max < 3) n_max = 3;
  while (p.size() > n_max) {
    std::size_t best = 0;
    double best_area = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Vec2& a = p[(i + p.size() - 1) % p.size()];
      const Vec2& b = p[i];
      const Vec2& c = p[(i + 1) % p.size()];
      const double area = 0.5 * std::abs(cross2(b - a, c - a));
      if (area < best_area - kAreaEps) {
        best_area = area;
        best = i;
      }
    }
    p.erase(p.begin() + long(best));
  }
  return p;
}

/// Offset a convex polygon: margin > 0 shrinks, margin < 0 grows. Each edge is
/// moved along its in-plane normal and the half-planes are re-intersected.
/// Returns nullopt when an inner offset annihilates the polygon.
inline std::optional<Polygon2> offset_contour(const Polygon2& polygon, double margin) {
  Polygon2 p = ensure_ccw(clean_polygon(polygon));
  if (p.size() < 3) return std::nullopt;
  if (margin == 0.0) return p;

  Polygon2 seed;
  if (margin > 0.0) {
    seed = p;
  } else {
    Vec2 lo = p[0], hi = p[0];
    for (const auto& v : p) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    const double pad = std::abs(margin) + 1.0;
    seed = {Vec2(lo.x() - pad, lo.y() - pad), Vec2(hi.x() + pad, lo.y() - pad),
            Vec2(hi.x() + pad, hi.y() + pad), Vec2(lo.x() - pad, hi.y() + pad)};
  }
  const std::size_t n = p.size();
  Polygon2 r = seed;
  for (std::size_t i = 0; i < n && r.size() >= 3; ++i) {
    const Vec2 e = p[(i + 1) % n] - p[i];
    const double len = e.norm();
    if (len <= kGeomEps) continue;
    const Vec2 nrm = Vec2(e.y(), -e.x()) / len;
    r = clip_halfplane(r, nrm, nrm.dot(p[i]) - margin);
  }
  r = clean_polygon(r);
  if (r.size() < 3 || polygon_area(r) <= kAreaEps) return std::nullopt;
  return r;
}

/// Offset for possibly concave simple contours: plain miter joins, falling
/// back to the convex hull when the joins self-intersect.
inline std::optional<Polygon2> offset_contour_general(const Polygon2& polygon, double margin) {
  Polygon2 p = ensure_ccw(clean_polygon(polygon));
  if (p.size() < 3) return std::nullopt;
  if (margin == 0.0) return p;
  if (is_convex(p)) return offset_contour(p, margin);

  const std::size_t n = p.size();
  Polygon2 out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& prev = p[(i + n - 1) % n];
    const Vec2& cur = p[i];
    const Vec2& next = p[(i + 1) % n];
    const Vec2 e0 = cur - prev;
    const Vec2 e1 = next - cur;
    const Vec2 n0 = Vec2(e0.y(), -e0.x()).normalized();
    const Vec2 n1 = Vec2(e1.y(), -e1.x()).normalized();
    const double denom = cross2(n0, n1);
    if (std::abs(denom) < 1e-8) {
      out[i] = cur - margin * n0;
      continue;
    }
    // Intersect the two shifted edge lines n0.x = n0.v - m, n1.x = n1.v - m.
    const double d0 = n0.dot(prev) - margin;
    const double d1 = n1.dot(cur) - margin;
    out[i] = Vec2(d0 * n1.y() - d1 * n0.y(), d1 * n0.x() - d0 * n1.x()) / denom;
  }
  out = clean_polygon(out);
  if (out.size() >= 3 && signed_area(out) > kAreaEps && is_simple(out)) {
    if ((margin > 0.0) == (polygon_area(out) < polygon_area(p))) return out;
  }
  return offset_contour(convex_hull(p), margin);
}

inline std::vector<Polygon2> convex_decompose(const Polygon2& polygon, double min_area) {
  Polygon2 p = ensure_ccw(clean_polygon(polygon));
  std::vector<Polygon2> pieces;
  if (p.size() < 3) return pieces;
  if (is_convex(p)) {
    pieces.push_back(p);
  } else {
    pieces = triangulate(p);
    merge_convex_pieces(pieces);
  }
  std::vector<Polygon2> out;
  for (auto& piece : pieces) {
    if (polygon_area(piece) < min_area) continue;
    if (piece.size() > 8) piece = simplify_contour(piece, 8);
    out.push_back(std::move(piece));
  }
  return out;
}

// --- Convex-convex distance (GJK on the Minkowski difference) ---

namespace detail {

inline std::size_t support_index(const Polygon2& poly, const Vec2& dir) {
  std::size_t best = 0;
  double best_d = poly[0].dot(dir);
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const double d = poly[i].dot(dir);
    if (d > best_d + 1e-15) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline Vec2 closest_on_segment(const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double l2 = ab.squaredNorm();
  if (l2 < 1e-30) return a;
  const double t = std::clamp(-a.dot(ab) / l2, 0.0, 1.0);
  return a + t * ab;
}

}  // namespace detail

/// Euclidean distance between two convex polygons; 0 when they touch/overlap.
inline double convex_polygon_distance(const Polygon2& a, const Polygon2& b) {
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto minkowski_support = [&](const Vec2& d) -> Vec2 {
    return a[detail::support_index(a, d)] - b[detail::support_index(b, -d)];
  };

  std::vector<Vec2> simplex;
  Vec2 v = polygon_centroid(a) - polygon_centroid(b);
  if (v.norm() < 1e-12) return 0.0;
  simplex.push_back(minkowski_support(-v));

  for (int iter = 0; iter < 100; ++iter) {
    // Closest point of the simplex to the origin, reducing to its support.
    if (simplex.size() == 1) {
      v = simplex[0];
    } else if (simplex.size() == 2) {
      v = detail::closest_on_segment(simplex[0], simplex[1]);
      if ((v - simplex[0]).norm() < 1e-14) simplex = {simplex[0]};
      if (simplex.size() == 2 && (v - simplex[1]).norm() < 1e-14) simplex = {simplex[1]};
    } else {
      // Triangle: detect containment, otherwise keep the nearest edge.
      const double d1 = cross2(simplex[1] - simplex[0], -simplex[0]);
      const double d2 = cross2(simplex[2] - simplex[1], -simplex[1]);
      const double d3 = cross2(simplex[0] - simplex[2], -simplex[2]);
      const bool neg = d1 < 0 || d2 < 0 || d3 < 0;
      const bool pos = d1 > 0 || d2 > 0 || d3 > 0;
      if (!(neg && pos)) return 0.0;
      struct Cand {
        Vec2 pt;
        std::array<int, 2> keep;
      };
      Cand best{detail::closest_on_segment(simplex[0], simplex[1]), {0, 1}};
      const Vec2 p12 = detail::closest_on_segment(simplex[1], simplex[2]);
      if (p12.squaredNorm() < best.pt.squaredNorm()) best = {p12, {1, 2}};
      const Vec2 p20 = detail::closest_on_segment(simplex[2], simplex[0]);
      if (p20.squaredNorm() < best.pt.squaredNorm()) best = {p20, {2, 0}};
      simplex = {simplex[std::size_t(best.keep[0])], simplex[std::size_t(best.keep[1])]};
      v = best.pt;
    }
    const double vn = v.norm();
    if (vn < 1e-12) return 0.0;
    const Vec2 w = minkowski_support(-v);
    // No progress towards the origin: v is the closest point.
    if (vn * vn - v.dot(w) <= 1e-12 * (1.0 + vn * vn)) return vn;
    simplex.push_back(w);
  }
  return v.norm();
}

}  // namespace stepkit
