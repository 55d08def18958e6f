#include "emavio/geometry.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include "emavio/error.hpp"
#include "euler_math.hpp"

namespace emavio {

SE3Transform::SE3Transform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : m_(Eigen::Matrix4d::Identity()) {
  m_.topLeftCorner<3, 3>() = rotation;
  m_.topRightCorner<3, 1>() = translation;
}

SE3Transform::SE3Transform(const Eigen::Matrix4d& matrix) : m_(matrix) {
  if (m_(3, 0) != 0.0 || m_(3, 1) != 0.0 || m_(3, 2) != 0.0 || m_(3, 3) != 1.0) {
    throw ContractError("SE3Transform: bottom row must be [0 0 0 1]");
  }
}

SE3Transform SE3Transform::operator*(const SE3Transform& rhs) const {
  const Eigen::Matrix3d r = rotation() * rhs.rotation();
  const Eigen::Vector3d t = rotation() * rhs.translation() + translation();
  return {r, t};
}

SE3Transform SE3Transform::inverse() const {
  const Eigen::Matrix3d rt = rotation().transpose();
  return {rt, -rt * translation()};
}

bool SE3Transform::is_valid(double tol) const {
  const Eigen::Matrix3d r = rotation();
  if (m_(3, 0) != 0.0 || m_(3, 1) != 0.0 || m_(3, 2) != 0.0 || m_(3, 3) != 1.0) return false;
  if (!((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol)) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Matrix3d euler_to_rotation(const Eigen::Vector3d& angles) {
  const auto e = detail::euler_rotation(angles[0], angles[1], angles[2]);
  Eigen::Matrix3d r;
  r << e[0], e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8];
  return r;
}

Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& rotation) {
  detail::Mat3Rows rows{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) rows[static_cast<std::size_t>(i * 3 + j)] = rotation(i, j);
  }
  Eigen::Vector3d out;
  if (!detail::rotation_euler(rows, out[0], out[1], out[2])) {
    throw DegenerateInputError("rotation_to_euler: pitch within gimbal-lock margin of +-pi/2");
  }
  return out;
}

SE3Transform pose_to_transform(const PoseDelta& pose) { return {euler_to_rotation(pose.psi), pose.t}; }

PoseDelta transform_to_pose(const SE3Transform& transform) {
  return {transform.translation(), rotation_to_euler(transform.rotation())};
}

SE3Transform compose_chain(std::span<const SE3Transform> transforms) {
  if (transforms.empty()) throw ContractError("compose_chain: empty transform list");
  SE3Transform acc = transforms.front();
  for (std::size_t i = 1; i < transforms.size(); ++i) acc = acc * transforms[i];
  return acc;
}

Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& rotation) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

Tensor pose_to_tensor(const PoseDelta& pose, bool requires_grad) {
  return Tensor::vector({pose.t[0], pose.t[1], pose.t[2], pose.psi[0], pose.psi[1], pose.psi[2]}, requires_grad);
}

PoseDelta tensor_to_pose(const Tensor& pose) {
  if (pose.shape() != Shape{6}) throw DimensionError("tensor_to_pose: expected [6], got " + shape_str(pose.shape()));
  PoseDelta p;
  p.t = {pose[0], pose[1], pose[2]};
  p.psi = {pose[3], pose[4], pose[5]};
  return p;
}

}  // namespace emavio
