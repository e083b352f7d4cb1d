#pragma once

#include <cmath>
#include <vector>

#include "stepkit/types.hpp"

namespace stepkit {

namespace detail {

inline Vec3 de_casteljau(std::vector<Vec3> w, double tau) {
  for (std::size_t level = w.size() - 1; level > 0; --level)
    for (std::size_t i = 0; i < level; ++i) w[i] = (1.0 - tau) * w[i] + tau * w[i + 1];
  return w.empty() ? Vec3::Zero() : w[0];
}

inline std::vector<Vec3> hodograph(const std::vector<Vec3>& pts, double duration) {
  std::vector<Vec3> out;
  const double d = double(pts.size()) - 1.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    out.push_back(d / duration * (pts[i + 1] - pts[i]));
  return out;
}

}  // namespace detail

/// Bezier curve p(t) = sum_i B_i^d(t / T) P_i on [0, T].
struct BezierCurve {
  std::vector<Vec3> control_points;
  double duration = 0.0;

  int degree() const { return int(control_points.size()) - 1; }

  Vec3 position(double t) const {
    return detail::de_casteljau(control_points, to_tau(t));
  }
  Vec3 velocity(double t) const {
    return detail::de_casteljau(detail::hodograph(control_points, duration), to_tau(t));
  }
  Vec3 acceleration(double t) const {
    return detail::de_casteljau(
        detail::hodograph(detail::hodograph(control_points, duration), duration), to_tau(t));
  }

 private:
  double to_tau(double t) const {
    if (t < -1e-9 || t > duration + 1e-9) throw OutOfDomain("Bezier evaluated outside [0, T]");
    return duration > 0.0 ? std::clamp(t / duration, 0.0, 1.0) : 0.0;
  }
};

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

/// Bernstein basis value B_i^d(tau).
inline double bernstein(int d, int i, double tau) {
  return binomial(d, i) * std::pow(tau, double(i)) * std::pow(1.0 - tau, double(d - i));
}

/// Exact control points of a polynomial curve sum_k c_k (t/T)^k.
inline BezierCurve bezier_from_monomial(const std::vector<Vec3>& coeffs, double duration) {
  const int d = int(coeffs.size()) - 1;
  BezierCurve out;
  out.duration = duration;
  out.control_points.resize(std::size_t(d) + 1, Vec3::Zero());
  for (int j = 0; j <= d; ++j) {
    Vec3 p = Vec3::Zero();
    for (int k = 0; k <= j; ++k) p += binomial(j, k) / binomial(d, k) * coeffs[std::size_t(k)];
    out.control_points[std::size_t(j)] = p;
  }
  return out;
}

/// Degree elevation by one: the same curve with one more control point.
inline BezierCurve elevate_degree(const BezierCurve& c) {
  const int d = c.degree();
  BezierCurve out;
  out.duration = c.duration;
  out.control_points.resize(std::size_t(d) + 2);
  out.control_points.front() = c.control_points.front();
  out.control_points.back() = c.control_points.back();
  for (int i = 1; i <= d; ++i) {
    const double a = double(i) / double(d + 1);
    out.control_points[std::size_t(i)] =
        a * c.control_points[std::size_t(i - 1)] + (1.0 - a) * c.control_points[std::size_t(i)];
  }
  return out;
}

}  // namespace stepkit
