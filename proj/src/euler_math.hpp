#pragma once

// Scalar closed forms for the intrinsic Z-Y-X Euler convention shared by the
// differentiable op and the evaluation-path geometry.
//   angles = (roll, pitch, yaw), R = Rz(yaw) * Ry(pitch) * Rx(roll)

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace emavio::detail {

using Mat3Rows = std::array<double, 9>;

inline constexpr double kGimbalMargin = 1e-6;

inline Mat3Rows euler_rotation(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  return {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
          sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
          -sp,     cp * sr,                cp * cr};
}

// Partial derivatives of euler_rotation with respect to roll, pitch, yaw.
inline std::array<Mat3Rows, 3> euler_rotation_partials(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  Mat3Rows d_roll{0.0, cy * sp * cr + sy * sr, -cy * sp * sr + sy * cr,
                  0.0, sy * sp * cr - cy * sr, -sy * sp * sr - cy * cr,
                  0.0, cp * cr,                -cp * sr};
  Mat3Rows d_pitch{-cy * sp, cy * cp * sr, cy * cp * cr,
                   -sy * sp, sy * cp * sr, sy * cp * cr,
                   -cp,      -sp * sr,     -sp * cr};
  Mat3Rows d_yaw{-sy * cp, -sy * sp * sr - cy * cr, -sy * sp * cr + cy * sr,
                 cy * cp,  cy * sp * sr - sy * cr,  cy * sp * cr + sy * sr,
                 0.0,      0.0,                     0.0};
  return {d_roll, d_pitch, d_yaw};
}

// Returns false when pitch is within kGimbalMargin of +-pi/2.
inline bool rotation_euler(const Mat3Rows& r, double& roll, double& pitch, double& yaw) {
  const double s = std::clamp(-r[6], -1.0, 1.0);
  pitch = std::asin(s);
  if (std::abs(pitch) > std::numbers::pi / 2 - kGimbalMargin) return false;
  roll = std::atan2(r[7], r[8]);
  yaw = std::atan2(r[3], r[0]);
  return true;
}

}  // namespace emavio::detail
