#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <complex>
#include <cstdint>
#include <vector>

namespace maxsens {

using Complex = std::complex<double>;
using Index = std::int32_t;

using Vec3 = Eigen::Vector3d;
using Vec3c = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;
using Mat3c = Eigen::Matrix3cd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;

// Vacuum constants (CODATA 2018).
inline constexpr double kEps0 = 8.8541878128e-12;  // F/m
inline constexpr double kMu0 = 1.25663706212e-6;   // H/m

inline Vec3c to_complex(const Vec3& v) { return v.cast<Complex>(); }

// a x b for a complex and b real. Written out because Eigen's cross
// conjugates complex results.
inline Vec3c cross(const Vec3c& a, const Vec3& b) {
  return Vec3c(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]);
}

// Euclidean modulus of a complex 3-vector, sqrt(sum |a_i|^2).
inline double modulus(const Vec3c& a) { return a.norm(); }

}  // namespace maxsens
