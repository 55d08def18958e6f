#include <gtest/gtest.h>

#include <cmath>

#include "emavio/error.hpp"
#include "emavio/render.hpp"
#include "emavio/trajectory.hpp"

namespace {

using namespace emavio;

TrajectorySpec still_spec() {
  TrajectorySpec s;
  s.speed_min = s.speed_max = 0.0;
  s.speed_wobble = 0.0;
  s.yaw_rate_max = 0.0;
  s.yaw_wobble = 0.0;
  s.pitch_amplitude = 0.0;
  s.roll_amplitude = 0.0;
  return s;
}

TEST(Trajectory, StationaryImuReadsGravityOnly) {
  const TrajectorySpec spec = still_spec();
  const auto windows = simulate_imu(MotionModel(spec), spec);
  ASSERT_EQ(windows.size(), spec.frame_count() - 1);
  for (const auto& w : windows) {
    ASSERT_EQ(w.length, spec.imu_per_interval() + 1);
    for (std::size_t k = 0; k < w.length; ++k) {
      for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(w.at(r, k), 0.0);
      EXPECT_EQ(w.at(5, k), kGravity);
    }
  }
}

TEST(Trajectory, ConstantYawRateShowsOnGyroZOnly) {
  TrajectorySpec spec = still_spec();
  spec.yaw_rate_max = 0.5;
  spec.seed = 11;
  const MotionModel model(spec);
  const double omega = model.euler_rate(0.0)[2];
  ASSERT_NE(omega, 0.0);
  for (const auto& w : simulate_imu(model, spec)) {
    for (std::size_t k = 0; k < w.length; ++k) {
      EXPECT_EQ(w.at(0, k), 0.0);
      EXPECT_EQ(w.at(1, k), 0.0);
      EXPECT_DOUBLE_EQ(w.at(2, k), omega);
    }
  }
}

TEST(Trajectory, ConstantVelocityGivesFixedStep) {
  TrajectorySpec spec = still_spec();
  spec.speed_min = spec.speed_max = 1.0;
  const Trajectory traj = generate_trajectory(spec);
  ASSERT_EQ(traj.relatives.size(), spec.frame_count() - 1);
  for (const auto& r : traj.relatives) {
    EXPECT_NEAR(r.t.x(), 0.1, 1e-12);
    EXPECT_NEAR(r.t.y(), 0.0, 1e-12);
    EXPECT_NEAR(r.t.z(), 0.0, 1e-12);
    EXPECT_NEAR(r.psi.norm(), 0.0, 1e-12);
  }
}

TEST(Trajectory, RelativesMatchPoseDifferences) {
  TrajectorySpec spec;
  spec.seed = 5;
  const Trajectory traj = generate_trajectory(spec);
  for (std::size_t i = 0; i + 1 < traj.poses.size(); ++i) {
    const PoseDelta d = transform_to_pose(traj.poses[i].inverse() * traj.poses[i + 1]);
    EXPECT_LT((d.t - traj.relatives[i].t).norm(), 1e-12);
    EXPECT_LT((d.psi - traj.relatives[i].psi).norm(), 1e-12);
  }
}

TEST(Trajectory, IntegratedGyroTracksYawIncrement) {
  TrajectorySpec spec;
  spec.seed = 9;
  spec.pitch_amplitude = spec.roll_amplitude = 0.0;
  const MotionModel model(spec);
  const Trajectory traj = generate_trajectory(spec);
  const auto windows = simulate_imu(model, spec);
  const double dt = 1.0 / static_cast<double>(spec.imu_rate_hz);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    double yaw = 0.0;
    for (std::size_t k = 0; k + 1 < windows[i].length; ++k) yaw += 0.5 * (windows[i].at(2, k) + windows[i].at(2, k + 1)) * dt;
    EXPECT_NEAR(yaw, traj.relatives[i].psi.z(), 1e-3) << "interval " << i;
  }
}

TEST(Trajectory, SeededAndDeterministic) {
  TrajectorySpec a;
  a.seed = 3;
  a.gyro_noise = 0.01;
  a.accel_noise = 0.05;
  TrajectorySpec b = a;
  const auto wa = simulate_imu(MotionModel(a), a), wb = simulate_imu(MotionModel(b), b);
  for (std::size_t i = 0; i < wa.size(); ++i) EXPECT_EQ(wa[i].samples, wb[i].samples);
  b.seed = 4;
  EXPECT_NE(generate_trajectory(a).relatives.front(), generate_trajectory(b).relatives.front());
}

TEST(Trajectory, InvalidSpecsAreRejected) {
  TrajectorySpec s;
  s.pitch_amplitude = 1.5;
  EXPECT_THROW(validate(s), ConfigError);
  s = TrajectorySpec{};
  s.imu_rate_hz = 105;
  EXPECT_THROW(validate(s), ConfigError);
  s = TrajectorySpec{};
  s.speed_min = 3.0;
  EXPECT_THROW(validate(s), ConfigError);
}

TEST(Render, IdentityWarpIsExact) {
  const Image tex = procedural_texture(1, 32, 32);
  EXPECT_EQ(warp_image(tex, 32, 32, PoseDelta{}, 20.0), tex);
  for (float v : tex) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Render, WholePixelShiftMovesTexture) {
  const Image tex = procedural_texture(2, 32, 32);
  PoseDelta p;
  p.t.x() = 1.0 / 20.0;  // one pixel at 20 px/m
  const Image w = warp_image(tex, 32, 32, p, 20.0);
  for (std::size_t r = 0; r < 32; ++r) {
    for (std::size_t c = 0; c + 1 < 32; ++c) EXPECT_NEAR(w[r * 32 + c], tex[r * 32 + c + 1], 1e-6);
  }
}

TEST(Render, OppositeYawWarpsRoughlyCancel) {
  const Image tex = procedural_texture(3, 32, 32);
  PoseDelta fwd, back;
  fwd.psi.z() = 0.05;
  back.psi.z() = -0.05;
  const Image round = warp_image(warp_image(tex, 32, 32, fwd, 20.0), 32, 32, back, 20.0);
  double err = 0.0;
  int n = 0;
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      const double dr = r - 15.5, dc = c - 15.5;
      if (dr * dr + dc * dc > 12.0 * 12.0) continue;
      err += std::abs(round[r * 32 + c] - tex[r * 32 + c]);
      ++n;
    }
  }
  EXPECT_LT(err / n, 0.02);
}

TEST(Render, TexturesDifferBySeedAndLargeWarpsFail) {
  EXPECT_NE(procedural_texture(1, 16, 16), procedural_texture(2, 16, 16));
  PoseDelta far;
  far.t.x() = 1.0;  // 20 px on a 32 px image
  EXPECT_THROW(warp_image(procedural_texture(1, 32, 32), 32, 32, far, 20.0), ConfigError);
}

}  // namespace
