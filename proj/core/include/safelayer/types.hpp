#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace safelayer {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Transform = Eigen::Isometry3d;

// Invalid argument or out-of-domain input (bad attachment index, non-rigid
// transform, non-positive step size, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Undamped pseudoinverse requested on a rank-deficient Jacobian.
class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sphere center coincides with the box center (or lies within one radius of
// it), so the shrink factor of the box distance is undefined.
class DegenerateCenterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Augmented Jacobian lost row rank; carries the offending singular values.
class BasisError : public std::runtime_error {
 public:
  BasisError(const std::string& what, double smallest, double largest)
      : std::runtime_error(what), smallest_singular_value(smallest),
        largest_singular_value(largest) {}
  double smallest_singular_value;
  double largest_singular_value;
};

// Malformed input file. `line` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, int line, const std::string& message)
      : std::runtime_error(path + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                           ": " + message),
        path(path), line(line) {}
  std::string path;
  int line;
};

// True when a 3x3 matrix is a proper rotation within `tol`.
bool is_rotation(const Matrix3& r, double tol = 1e-9);

}  // namespace safelayer
