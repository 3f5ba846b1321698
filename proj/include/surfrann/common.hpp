#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace surfrann {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Raised when user input (config file, CLI argument, malformed data file)
// fails validation. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a numerical stage breaks down (degenerate metric, vanishing
// level-set gradient, non-finite system entries). CLI exit code 3.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ambient function data at a point in R^3 (or R^4 with leading time column
// for space-time functions; spatial jets keep the 3x3 convention).
struct AmbientJet {
  double value = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
};

} // namespace surfrann
