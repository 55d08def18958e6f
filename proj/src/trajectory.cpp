#include "emavio/trajectory.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "emavio/error.hpp"
#include "emavio/rng.hpp"

namespace emavio {

namespace {

// 5-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> kGaussNodes{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                            0.9061798459386640};
constexpr std::array<double, 5> kGaussWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                              0.4786286704993665, 0.2369268850561891};

}  // namespace

std::size_t TrajectorySpec::frame_count() const {
  return static_cast<std::size_t>(std::llround(duration_s * static_cast<double>(image_rate_hz))) + 1;
}

void validate(const TrajectorySpec& spec) {
  if (!(spec.duration_s > 0.0)) throw ConfigError("trajectory: duration_s must be positive");
  if (spec.image_rate_hz == 0 || spec.imu_rate_hz == 0) throw ConfigError("trajectory: rates must be positive");
  if (spec.imu_rate_hz % spec.image_rate_hz != 0) {
    throw ConfigError("trajectory: imu_rate_hz (" + std::to_string(spec.imu_rate_hz) +
                      ") must be a multiple of image_rate_hz (" + std::to_string(spec.image_rate_hz) + ")");
  }
  if (spec.speed_min < 0.0 || spec.speed_max < spec.speed_min) {
    throw ConfigError("trajectory: need 0 <= speed_min <= speed_max");
  }
  if (spec.speed_wobble < 0.0 || spec.yaw_rate_max < 0.0 || spec.yaw_wobble < 0.0 || spec.pitch_amplitude < 0.0 ||
      spec.roll_amplitude < 0.0 || spec.gyro_noise < 0.0 || spec.accel_noise < 0.0) {
    throw ConfigError("trajectory: amplitudes and noise levels must be non-negative");
  }
  if (spec.pitch_amplitude >= std::numbers::pi / 2.0 - 0.1) {
    throw ConfigError("trajectory: pitch_amplitude " + std::to_string(spec.pitch_amplitude) +
                      " reaches the gimbal guard band (must stay below pi/2 - 0.1)");
  }
  if (spec.frame_count() < 2) throw ConfigError("trajectory: duration too short for two frames");
}

double MotionModel::Wave::at(double t) const { return amplitude * std::sin(omega * t + phase); }
double MotionModel::Wave::rate(double t) const { return amplitude * omega * std::cos(omega * t + phase); }

MotionModel::MotionModel(const TrajectorySpec& spec) {
  validate(spec);
  Rng rng(spec.seed, 0x6d6f74696f6eULL);
  auto wave = [&rng](double amplitude) {
    Wave w;
    w.amplitude = amplitude * rng.uniform(0.5, 1.0);
    w.omega = rng.uniform(0.3, 1.2);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return w;
  };
  base_speed_ = rng.uniform(spec.speed_min, spec.speed_max);
  yaw_rate_ = rng.uniform(-spec.yaw_rate_max, spec.yaw_rate_max);
  speed_wave_ = wave(spec.speed_wobble);
  if (speed_wave_.amplitude > base_speed_) speed_wave_.amplitude = base_speed_;
  yaw_wave_ = wave(spec.yaw_wobble);
  pitch_wave_ = wave(spec.pitch_amplitude);
  roll_wave_ = wave(spec.roll_amplitude);
}

double MotionModel::speed(double t) const { return base_speed_ + speed_wave_.at(t); }
double MotionModel::speed_rate(double t) const { return speed_wave_.rate(t); }

Eigen::Vector3d MotionModel::euler(double t) const {
  // Yaw starts at zero so every trajectory leaves the origin heading along x.
  const double yaw = yaw_rate_ * t + yaw_wave_.at(t) - yaw_wave_.at(0.0);
  return {roll_wave_.at(t), pitch_wave_.at(t), yaw};
}

Eigen::Vector3d MotionModel::euler_rate(double t) const {
  return {roll_wave_.rate(t), pitch_wave_.rate(t), yaw_rate_ + yaw_wave_.rate(t)};
}

Eigen::Vector3d MotionModel::world_velocity(double t) const { return speed(t) * rotation(t).col(0); }

Eigen::Vector3d MotionModel::body_rate(double t) const {
  const Eigen::Vector3d e = euler(t);
  const Eigen::Vector3d r = euler_rate(t);
  const double sr = std::sin(e.x()), cr = std::cos(e.x());
  const double sp = std::sin(e.y()), cp = std::cos(e.y());
  return {r.x() - sp * r.z(), cr * r.y() + sr * cp * r.z(), -sr * r.y() + cr * cp * r.z()};
}

Eigen::Vector3d MotionModel::specific_force(double t) const {
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d accel_body = speed_rate(t) * ex + speed(t) * body_rate(t).cross(ex);
  const Eigen::Vector3d gravity(0.0, 0.0, -kGravity);
  return accel_body - rotation(t).transpose() * gravity;
}

Trajectory generate_trajectory(const TrajectorySpec& spec) {
  const MotionModel model(spec);
  const std::size_t frames = spec.frame_count();
  const std::size_t sub = spec.imu_per_interval();
  const double frame_dt = 1.0 / static_cast<double>(spec.image_rate_hz);
  const double dt = frame_dt / static_cast<double>(sub);

  Trajectory out;
  out.times.reserve(frames);
  out.poses.reserve(frames);
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = static_cast<double>(f) * frame_dt;
    out.times.push_back(t);
    out.poses.emplace_back(model.rotation(t), position);
    if (f + 1 == frames) break;
    for (std::size_t k = 0; k < sub; ++k) {
      const double mid = t + (static_cast<double>(k) + 0.5) * dt;
      Eigen::Vector3d step = Eigen::Vector3d::Zero();
      for (std::size_t g = 0; g < kGaussNodes.size(); ++g) {
        step += kGaussWeights[g] * model.world_velocity(mid + 0.5 * dt * kGaussNodes[g]);
      }
      position += 0.5 * dt * step;
    }
  }
  out.relatives.reserve(frames - 1);
  for (std::size_t f = 0; f + 1 < frames; ++f) {
    out.relatives.push_back(transform_to_pose(out.poses[f].inverse() * out.poses[f + 1]));
  }
  return out;
}

std::vector<ImuWindow> simulate_imu(const MotionModel& model, const TrajectorySpec& spec) {
  validate(spec);
  const std::size_t intervals = spec.frame_count() - 1;
  const std::size_t sub = spec.imu_per_interval();
  const std::size_t length = sub + 1;
  const double imu_dt = 1.0 / static_cast<double>(spec.imu_rate_hz);
  Rng noise(spec.seed, 0x696d75ULL);
  std::vector<ImuWindow> windows(intervals);
  for (std::size_t i = 0; i < intervals; ++i) {
    ImuWindow& w = windows[i];
    w.length = length;
    w.samples.assign(6 * length, 0.0);
    for (std::size_t k = 0; k < length; ++k) {
      const double t = static_cast<double>(i * sub + k) * imu_dt;
      const Eigen::Vector3d gyro = model.body_rate(t);
      const Eigen::Vector3d accel = model.specific_force(t);
      for (std::size_t a = 0; a < 3; ++a) {
        w.samples[a * length + k] = gyro[a];
        w.samples[(3 + a) * length + k] = accel[a];
      }
    }
    // Noise is drawn unconditionally so the stream position does not depend
    // on the sigma values.
    for (std::size_t r = 0; r < 6; ++r) {
      const double sigma = r < 3 ? spec.gyro_noise : spec.accel_noise;
      for (std::size_t k = 0; k < length; ++k) w.samples[r * length + k] += sigma * noise.normal();
    }
  }
  return windows;
}

}  // namespace emavio
