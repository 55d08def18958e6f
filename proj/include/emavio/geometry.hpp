#pragma once

// Rigid-motion algebra for the evaluation path (Eigen, no autodiff).
//
// Euler convention, used everywhere in the project: angles are
// (roll, pitch, yaw) and R = Rz(yaw) * Ry(pitch) * Rx(roll), i.e. intrinsic
// Z-Y-X. Positive yaw rotates the x axis towards the y axis.

#include <Eigen/Core>
#include <span>
#include <vector>

#include "emavio/tensor.hpp"

namespace emavio {

// World frame is z-up; gravity is (0, 0, -kGravity).
inline constexpr double kGravity = 9.81;

// Relative motion between two frames: translation in meters, Euler angles in
// radians.
struct PoseDelta {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  Eigen::Vector3d psi = Eigen::Vector3d::Zero();

  bool operator==(const PoseDelta&) const = default;
};

// 4x4 homogeneous transform [R t; 0 0 0 1].
class SE3Transform {
 public:
  SE3Transform() : m_(Eigen::Matrix4d::Identity()) {}
  SE3Transform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);
  // Throws ContractError unless the bottom row is exactly [0 0 0 1].
  explicit SE3Transform(const Eigen::Matrix4d& matrix);

  static SE3Transform identity() { return {}; }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }

  SE3Transform operator*(const SE3Transform& rhs) const;
  SE3Transform inverse() const;

  // R^T R = I and det R = 1 within tol, bottom row exact.
  bool is_valid(double tol = 1e-9) const;

 private:
  Eigen::Matrix4d m_;
};

Eigen::Matrix3d euler_to_rotation(const Eigen::Vector3d& angles);
// Throws DegenerateInputError within 1e-6 rad of pitch = +-pi/2.
Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& rotation);

SE3Transform pose_to_transform(const PoseDelta& pose);
PoseDelta transform_to_pose(const SE3Transform& transform);

// Left-to-right product T_1 * T_2 * ... * T_k. Throws ContractError when empty.
SE3Transform compose_chain(std::span<const SE3Transform> transforms);

// Nearest rotation in the Frobenius sense.
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& rotation);

// PoseDelta <-> 6-vector tensor (t then psi).
Tensor pose_to_tensor(const PoseDelta& pose, bool requires_grad = false);
PoseDelta tensor_to_pose(const Tensor& pose);

}  // namespace emavio
