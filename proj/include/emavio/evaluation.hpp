#pragma once

// Odometry metrics: KITTI sub-sequence drift and horizontal position error.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "emavio/geometry.hpp"

namespace emavio {

// pose_0 = origin, pose_k = pose_{k-1} * T_k. Rotations are projected back
// onto SO(3) every 100 compositions. Returns rel.size() + 1 poses.
std::vector<SE3Transform> accumulate_trajectory(std::span<const PoseDelta> rel,
                                                const SE3Transform& origin = SE3Transform::identity());

// {100, ..., 800} m, or {10, ..., 80} m at desk scale.
std::vector<double> drift_lengths(bool desk_scale);

struct LengthDrift {
  double length_m = 0.0;
  double t_rel_percent = 0.0;        // mean translation error, % of length
  double r_rel_deg_per_100m = 0.0;   // mean rotation error, degrees per 100 m
  std::size_t segments = 0;
};

struct DriftResult {
  std::vector<LengthDrift> per_length;  // lengths with at least one segment
  double t_rel_avg = 0.0;               // mean of the per-length entries
  double r_rel_avg = 0.0;
};

// For every start frame (stepping by `stride`) and length l, the segment ends
// at the first frame whose ground-truth arc length from the start is >= l.
// Segment error E = (pred_s^-1 pred_e)^-1 (gt_s^-1 gt_e); translation error is
// |t(E)| / l and rotation error is the angle of R(E) / l. Throws
// ContractError on unequal series and when no length fits the trajectory.
DriftResult kitti_drift(std::span<const SE3Transform> pred, std::span<const SE3Transform> gt,
                        std::span<const double> lengths, std::size_t stride = 1);

// Pools per-sequence results segment-weighted.
DriftResult merge_drift(std::span<const DriftResult> parts);

// sqrt(mean_i |p_i - p_hat_i|^2) over world x-y. Throws ContractError on
// unequal lengths or empty series.
double hpe(std::span<const SE3Transform> pred, std::span<const SE3Transform> gt);

// HPE between composed first-to-last motions of every n-frame window:
// pred_rel[s] ... pred_rel[s + n - 2] against gt_poses[s]^-1 gt_poses[s + n - 1].
// Throws ContractError unless gt_poses has one pose more than pred_rel and at
// least n of them, and ConfigError when n < 2.
double composition_hpe(std::span<const PoseDelta> pred_rel, std::span<const SE3Transform> gt_poses, std::size_t n);

struct EvalReport {
  DriftResult drift;
  double hpe_m = 0.0;
  double composition_hpe_m = 0.0;  // over windows of loss.sequence_length frames
  std::size_t frame_count = 0;
  std::map<std::string, std::string> config;  // echo of the evaluating config
};

// Writes `path` as key-sorted JSON and a CSV (same stem, .csv) with columns
// length_m, t_rel_percent, r_rel_deg_per_100m, segments. Throws IoError.
void emit_report(const EvalReport& report, const std::filesystem::path& path);
std::filesystem::path report_csv_path(const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

}  // namespace emavio
