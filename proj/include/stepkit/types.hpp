#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace stepkit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;

/// Planar polygon, one vertex per entry, implicitly closed.
using Polygon2 = std::vector<Vec2>;
/// Polygon embedded in a 3D plane.
using Polygon3 = std::vector<Vec3>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Plane fit failed because the sample matrix is rank-deficient.
struct DegenerateFit : Error {
  using Error::Error;
};

/// Scenario file could not be parsed.
struct ParseError : Error {
  using Error::Error;
};

/// Scenario file parsed but violates an input invariant.
struct ValidationError : Error {
  using Error::Error;
};

/// Curve evaluated outside [0, T].
struct OutOfDomain : Error {
  using Error::Error;
};

/// A contact phase has no candidate surface within reach.
struct NoReachableSurface : Error {
  NoReachableSurface(int phase, int foot, const std::string& what)
      : Error(what), phase(phase), foot(foot) {}
  int phase;
  int foot;
};

/// Returned solution violates a hardened Big-M row; M was too small.
struct BigMTooSmall : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace stepkit
