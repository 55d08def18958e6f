#pragma once

// Seeded continuous-time motion model, ground-truth poses at image rate and
// the IMU readings it implies.
//
// World frame is z-up with gravity (0, 0, -9.81). The body moves along its own
// x axis with a time-varying speed while yaw, pitch and roll follow sinusoid
// mixtures, so the path is planar-dominant and smooth.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "emavio/geometry.hpp"

namespace emavio {

struct TrajectorySpec {
  std::uint64_t seed = 1;
  double duration_s = 4.0;
  std::size_t image_rate_hz = 10;
  std::size_t imu_rate_hz = 100;
  // Forward speed: base drawn from [speed_min, speed_max], plus a sinusoid of
  // amplitude up to speed_wobble (never below zero).
  double speed_min = 1.0;
  double speed_max = 2.0;
  double speed_wobble = 0.3;
  // Constant yaw rate drawn from [-yaw_rate_max, yaw_rate_max] plus a
  // sinusoid of amplitude up to yaw_wobble (rad).
  double yaw_rate_max = 0.1;
  double yaw_wobble = 0.1;
  double pitch_amplitude = 0.05;
  double roll_amplitude = 0.05;
  double gyro_noise = 0.0;   // rad/s, per-axis sigma
  double accel_noise = 0.0;  // m/s^2, per-axis sigma

  std::size_t frame_count() const;
  std::size_t imu_per_interval() const { return imu_rate_hz / image_rate_hz; }
};

// Throws ConfigError for non-positive rates/duration, imu rate not a multiple
// of the image rate, inverted speed bounds, negative amplitudes, or a pitch
// amplitude reaching within 0.1 rad of +-pi/2.
void validate(const TrajectorySpec& spec);

class MotionModel {
 public:
  explicit MotionModel(const TrajectorySpec& spec);

  double speed(double t) const;
  double speed_rate(double t) const;
  // (roll, pitch, yaw)
  Eigen::Vector3d euler(double t) const;
  Eigen::Vector3d euler_rate(double t) const;

  Eigen::Matrix3d rotation(double t) const { return euler_to_rotation(euler(t)); }
  Eigen::Vector3d world_velocity(double t) const;
  // Body-frame angular velocity.
  Eigen::Vector3d body_rate(double t) const;
  // Body-frame specific force R^T (a - g).
  Eigen::Vector3d specific_force(double t) const;

 private:
  struct Wave {
    double amplitude = 0.0, omega = 0.0, phase = 0.0;
    double at(double t) const;
    double rate(double t) const;
  };
  double base_speed_ = 0.0;
  double yaw_rate_ = 0.0;
  Wave speed_wave_, yaw_wave_, pitch_wave_, roll_wave_;
};

struct Trajectory {
  std::vector<double> times;          // frame timestamps
  std::vector<SE3Transform> poses;    // world-from-body at each frame
  std::vector<PoseDelta> relatives;   // frame i -> i+1 in frame i's body frame
};

Trajectory generate_trajectory(const TrajectorySpec& spec);

// One inter-frame interval: 6 x (imu_per_interval + 1) row-major samples,
// rows gyro xyz then accel xyz, covering both frame instants.
struct ImuWindow {
  std::size_t length = 0;
  std::vector<double> samples;

  double at(std::size_t row, std::size_t k) const { return samples[row * length + k]; }
};

std::vector<ImuWindow> simulate_imu(const MotionModel& model, const TrajectorySpec& spec);

}  // namespace emavio
