#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

#include "emavio/error.hpp"
#include "emavio/geometry.hpp"
#include "emavio/losses.hpp"
#include "emavio/rng.hpp"

namespace {

using namespace emavio;

PoseDelta random_pose(Rng& rng, double t_scale = 1.0, double pitch_max = 1.4) {
  PoseDelta p;
  p.t = Eigen::Vector3d(rng.uniform(-t_scale, t_scale), rng.uniform(-t_scale, t_scale), rng.uniform(-t_scale, t_scale));
  p.psi = Eigen::Vector3d(rng.uniform(-3.1, 3.1), rng.uniform(-pitch_max, pitch_max), rng.uniform(-3.1, 3.1));
  return p;
}

TEST(Geometry, EulerConventionIsZyx) {
  const double a = 0.3;
  const Eigen::Matrix3d yaw = euler_to_rotation(Eigen::Vector3d(0, 0, a));
  const Eigen::Vector3d x = yaw * Eigen::Vector3d::UnitX();
  EXPECT_NEAR(x.y(), std::sin(a), 1e-15);  // positive yaw turns x towards y
  const Eigen::Vector3d e(0.1, 0.2, 0.3);
  const Eigen::Matrix3d expected = Eigen::AngleAxisd(e[2], Eigen::Vector3d::UnitZ()).toRotationMatrix() *
                                   Eigen::AngleAxisd(e[1], Eigen::Vector3d::UnitY()).toRotationMatrix() *
                                   Eigen::AngleAxisd(e[0], Eigen::Vector3d::UnitX()).toRotationMatrix();
  EXPECT_LT((euler_to_rotation(e) - expected).norm(), 1e-15);
}

TEST(Geometry, EulerRoundTripAwayFromGimbalLock) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d e = random_pose(rng).psi;
    EXPECT_LT((rotation_to_euler(euler_to_rotation(e)) - e).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Geometry, GimbalLockIsRejected) {
  for (const double gap : {1e-8, 1e-9}) {
    const Eigen::Matrix3d r = euler_to_rotation(Eigen::Vector3d(0.2, std::numbers::pi / 2 - gap, 0.1));
    EXPECT_THROW(rotation_to_euler(r), DegenerateInputError) << gap;
  }
}

TEST(Geometry, ClosedFormCases) {
  EXPECT_EQ(euler_to_rotation(Eigen::Vector3d::Zero()), Eigen::Matrix3d::Identity());
  EXPECT_EQ(rotation_to_euler(Eigen::Matrix3d::Identity()), Eigen::Vector3d::Zero());
  const Eigen::Vector3d y = euler_to_rotation(Eigen::Vector3d(0, 0, std::numbers::pi / 2)) * Eigen::Vector3d::UnitX();
  EXPECT_LT((y - Eigen::Vector3d::UnitY()).norm(), 1e-15);

  EXPECT_EQ(pose_to_transform(PoseDelta{}).matrix(), Eigen::Matrix4d::Identity());
  PoseDelta shift;
  shift.t = Eigen::Vector3d(1, 2, 3);
  const SE3Transform t = pose_to_transform(shift);
  EXPECT_EQ(t.rotation(), Eigen::Matrix3d::Identity());
  EXPECT_EQ(t.translation(), Eigen::Vector3d(1, 2, 3));

  PoseDelta a, b;
  a.t = Eigen::Vector3d(1, 0, 0);
  b.t = Eigen::Vector3d(0, 1, 0);
  const std::vector<SE3Transform> chain{pose_to_transform(a), pose_to_transform(b)};
  EXPECT_EQ(compose_chain(chain).translation(), Eigen::Vector3d(1, 1, 0));
  const std::vector<SE3Transform> identities(4, SE3Transform::identity());
  EXPECT_EQ(compose_chain(identities).matrix(), Eigen::Matrix4d::Identity());
}

TEST(Geometry, InverseFromTransposedRotation) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const PoseDelta p = random_pose(rng);
    const Eigen::Matrix3d r = euler_to_rotation(p.psi);
    PoseDelta inv;
    inv.t = -r.transpose() * p.t;
    inv.psi = rotation_to_euler(r.transpose());
    const Eigen::Matrix4d m = (pose_to_transform(p) * pose_to_transform(inv)).matrix();
    EXPECT_LT((m - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(m.row(3), Eigen::RowVector4d(0, 0, 0, 1));
  }
}

TEST(Geometry, ComposeChainMatchesExplicitProduct) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SE3Transform> chain;
    Eigen::Matrix4d brute = Eigen::Matrix4d::Identity();
    for (int k = 0; k < 5; ++k) {
      chain.push_back(pose_to_transform(random_pose(rng)));
      const Eigen::Matrix4d m = chain.back().matrix();
      Eigen::Matrix4d next = Eigen::Matrix4d::Zero();
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
          for (int p = 0; p < 4; ++p) next(i, j) += brute(i, p) * m(p, j);
        }
      }
      brute = next;
    }
    EXPECT_LT((compose_chain(chain).matrix() - brute).cwiseAbs().maxCoeff(), 1e-10);
  }
  EXPECT_THROW(compose_chain({}), ContractError);
}

TEST(Geometry, TransformInverseAndValidity) {
  Rng rng(3);
  const SE3Transform t = pose_to_transform(random_pose(rng));
  EXPECT_TRUE(t.is_valid());
  EXPECT_LT(((t * t.inverse()).matrix() - Eigen::Matrix4d::Identity()).norm(), 1e-14);
  Eigen::Matrix4d bad = t.matrix();
  bad(3, 0) = 1e-3;
  EXPECT_THROW(SE3Transform{bad}, ContractError);
  const PoseDelta p = random_pose(rng);
  const PoseDelta back = transform_to_pose(pose_to_transform(p));
  EXPECT_LT((back.t - p.t).norm(), 1e-15);
  EXPECT_LT((back.psi - p.psi).norm(), 1e-12);
}

TEST(Geometry, OrthonormalizeRestoresRotation) {
  Rng rng(4);
  Eigen::Matrix3d r = euler_to_rotation(random_pose(rng).psi);
  r(0, 1) += 1e-6;
  const Eigen::Matrix3d o = orthonormalize(r);
  EXPECT_LT((o.transpose() * o - Eigen::Matrix3d::Identity()).norm(), 1e-14);
  EXPECT_NEAR(o.determinant(), 1.0, 1e-14);
  EXPECT_LT((o - r).norm(), 1e-5);
}

TEST(Losses, RmseReducesOverFramesAndComponents) {
  PoseDelta gt;
  // Translation error (3, 0, 0) on the only frame: sqrt(9 / 3).
  const Tensor pred = Tensor::vector({3.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  EXPECT_NEAR(frame_loss({&pred, 1}, {&gt, 1}, 100.0).item(), std::sqrt(3.0), 1e-15);

  // Rotation error of 0.01 on every component of two frames, weighted by 100.
  const std::vector<Tensor> preds{Tensor::vector({0, 0, 0, 0.01, 0.01, 0.01}),
                                  Tensor::vector({0, 0, 0, -0.01, -0.01, -0.01})};
  const std::vector<PoseDelta> gts(2);
  EXPECT_NEAR(frame_loss(preds, gts, 100.0).item(), 1.0, 1e-12);
  EXPECT_THROW(frame_loss(preds, {&gt, 1}, 100.0), ContractError);
}

TEST(Losses, FrameLossMatchesScalarRecomputation) {
  Rng rng(7);
  std::vector<Tensor> preds;
  std::vector<PoseDelta> gts;
  double t_sq = 0.0, r_sq = 0.0;
  for (int k = 0; k < 6; ++k) {
    const PoseDelta p = random_pose(rng, 1.0, 0.5), g = random_pose(rng, 1.0, 0.5);
    preds.push_back(pose_to_tensor(p));
    gts.push_back(g);
    for (int i = 0; i < 3; ++i) {
      t_sq += (p.t[i] - g.t[i]) * (p.t[i] - g.t[i]);
      r_sq += (p.psi[i] - g.psi[i]) * (p.psi[i] - g.psi[i]);
    }
  }
  const double expected = std::sqrt(t_sq / 18.0) + 37.0 * std::sqrt(r_sq / 18.0);
  EXPECT_NEAR(frame_loss(preds, gts, 37.0).item(), expected, 1e-12);
}

TEST(Losses, TwoFrameSequenceLossIsFrameLossOfThePair) {
  Rng rng(8);
  const PoseDelta p = random_pose(rng, 1.0, 0.5), g = random_pose(rng, 1.0, 0.5);
  const Tensor pred = pose_to_tensor(p);
  EXPECT_NEAR(sequence_loss({&pred, 1}, g, 100.0).item(), frame_loss({&pred, 1}, {&g, 1}, 100.0).item(), 1e-12);
}

TEST(Losses, SequenceLossVanishesOnConsistentChain) {
  Rng rng(5);
  std::vector<Tensor> preds;
  std::vector<SE3Transform> chain;
  for (int k = 0; k < 4; ++k) {
    const PoseDelta p = random_pose(rng, 0.3, 0.3);
    preds.push_back(pose_to_tensor(p));
    chain.push_back(pose_to_transform(p));
  }
  const PoseDelta gt_seq = transform_to_pose(compose_chain(chain));
  EXPECT_LT(sequence_loss(preds, gt_seq, 100.0).item(), 1e-10);

  const Tensor composed = compose_poses(preds);
  const PoseDelta c = tensor_to_pose(composed);
  EXPECT_LT((c.t - gt_seq.t).norm(), 1e-12);
  EXPECT_LT((c.psi - gt_seq.psi).norm(), 1e-12);
}

TEST(Losses, NonFiniteTotalRaisesDivergence) {
  const Tensor nan = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
  try {
    total_loss(Tensor::scalar(1.0), nan, 17);
    FAIL() << "expected TrainingDivergence";
  } catch (const TrainingDivergence& e) {
    EXPECT_EQ(e.step(), 17);
  }
  EXPECT_DOUBLE_EQ(total_loss(Tensor::scalar(1.5), Tensor::scalar(2.0)).item(), 3.5);
}

}  // namespace
