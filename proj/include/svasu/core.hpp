#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace svasu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// File missing, truncated, or malformed. CLI exit code 3.
class IoError : public Error {
public:
  using Error::Error;
};

/// Conformability violation between matrices. CLI exit code 4.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Out-of-range parameter or invalid configuration.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
  if (!cond) throw DimensionError(msg);
}

/// Angle in radians between two spectra; 0 for parallel vectors.
inline double spectral_angle(const Vector& u, const Vector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    throw InvalidArgument("spectral_angle: zero-norm spectrum");
  double c = u.dot(v) / (nu * nv);
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c);
}

inline constexpr double kDegree = 3.14159265358979323846 / 180.0;

}  // namespace svasu
