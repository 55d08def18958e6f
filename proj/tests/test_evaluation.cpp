#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "emavio/error.hpp"
#include "emavio/evaluation.hpp"
#include "emavio/rng.hpp"
#include "reference_metrics.hpp"
#include "support.hpp"

namespace {

using namespace emavio;
using emavio::test::read_bytes;
using emavio::test::TempDir;

std::vector<SE3Transform> wandering_path(std::uint64_t seed, std::size_t n, double step = 0.5) {
  Rng rng(seed);
  std::vector<PoseDelta> rel(n - 1);
  for (auto& r : rel) {
    r.t = Eigen::Vector3d(step * rng.uniform(0.8, 1.2), 0.02 * rng.uniform(-1, 1), 0.01 * rng.uniform(-1, 1));
    r.psi = Eigen::Vector3d(0.005 * rng.uniform(-1, 1), 0.005 * rng.uniform(-1, 1), 0.05 * rng.uniform(-1, 1));
  }
  return accumulate_trajectory(rel);
}

std::vector<SE3Transform> perturbed(const std::vector<SE3Transform>& gt, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PoseDelta> rel;
  for (std::size_t i = 0; i + 1 < gt.size(); ++i) {
    PoseDelta d = transform_to_pose(gt[i].inverse() * gt[i + 1]);
    d.t *= 1.0 + 0.05 * rng.uniform(-1, 1);
    d.psi.z() += 0.01 * rng.uniform(-1, 1);
    rel.push_back(d);
  }
  return accumulate_trajectory(rel, gt.front());
}

std::vector<reference::Pose> to_reference(const std::vector<SE3Transform>& poses) {
  std::vector<reference::Pose> out;
  for (const auto& p : poses) {
    reference::Pose r{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) r[i * 4 + j] = p.matrix()(i, j);
    }
    out.push_back(r);
  }
  return out;
}

std::vector<SE3Transform> straight_line(std::size_t n, double step) {
  std::vector<SE3Transform> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.emplace_back(Eigen::Matrix3d::Identity(), Eigen::Vector3d(step * static_cast<double>(i), 0, 0));
  }
  return out;
}

TEST(Evaluation, PerfectPredictionHasZeroDrift) {
  const auto gt = wandering_path(1, 400);
  const auto lengths = drift_lengths(true);
  const DriftResult r = kitti_drift(gt, gt, lengths);
  ASSERT_FALSE(r.per_length.empty());
  for (const auto& l : r.per_length) {
    EXPECT_EQ(l.t_rel_percent, 0.0);
    EXPECT_EQ(l.r_rel_deg_per_100m, 0.0);
  }
  EXPECT_EQ(r.t_rel_avg, 0.0);
  EXPECT_EQ(hpe(gt, gt), 0.0);
}

TEST(Evaluation, ScaledStraightLineDriftsOnePercent) {
  const auto gt = straight_line(200, 0.5);
  std::vector<SE3Transform> pred;
  for (const auto& p : gt) pred.emplace_back(Eigen::Matrix3d::Identity(), 1.01 * p.translation());
  const auto lengths = drift_lengths(true);
  const DriftResult r = kitti_drift(pred, gt, lengths);
  ASSERT_EQ(r.per_length.size(), lengths.size());
  for (const auto& l : r.per_length) {
    EXPECT_NEAR(l.t_rel_percent, 1.0, 1e-6) << l.length_m;
    EXPECT_EQ(l.r_rel_deg_per_100m, 0.0);
  }
}

TEST(Evaluation, HorizontalErrorOfConstantOffset) {
  const auto gt = straight_line(50, 1.0);
  std::vector<SE3Transform> pred;
  for (const auto& p : gt) pred.emplace_back(Eigen::Matrix3d::Identity(), p.translation() + Eigen::Vector3d(3, 4, 7));
  EXPECT_NEAR(hpe(pred, gt), 5.0, 1e-12);
  EXPECT_THROW(hpe({}, {}), ContractError);
  EXPECT_THROW(hpe(pred, std::span(gt).first(3)), ContractError);
}

TEST(Evaluation, AgreesWithReferenceEvaluator) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto gt = wandering_path(seed, 500);
    const auto pred = perturbed(gt, seed + 100);
    const auto lengths = drift_lengths(true);
    const DriftResult lib = kitti_drift(pred, gt, lengths, 3);
    const reference::Result ref = reference::drift(to_reference(pred), to_reference(gt), lengths, 3);
    ASSERT_EQ(lib.per_length.size(), ref.lengths.size());
    for (std::size_t i = 0; i < ref.lengths.size(); ++i) {
      EXPECT_EQ(lib.per_length[i].segments, static_cast<std::size_t>(ref.lengths[i].segments));
      EXPECT_NEAR(lib.per_length[i].t_rel_percent, ref.lengths[i].t_rel, 1e-9);
      EXPECT_NEAR(lib.per_length[i].r_rel_deg_per_100m, ref.lengths[i].r_rel, 1e-9);
    }
    EXPECT_NEAR(lib.t_rel_avg, ref.t_avg, 1e-9);
    EXPECT_NEAR(lib.r_rel_avg, ref.r_avg, 1e-9);
    EXPECT_NEAR(hpe(pred, gt), reference::hpe(to_reference(pred), to_reference(gt)), 1e-9);
  }
}

TEST(Evaluation, CompositionErrorOfWindows) {
  // Straight line at 1 m per frame; predictions overshoot by 0.1 m per frame,
  // so every 4-frame window ends 0.3 m too far.
  const auto gt = straight_line(20, 1.0);
  std::vector<PoseDelta> pred(19);
  for (auto& p : pred) p.t = Eigen::Vector3d(1.1, 0.0, 0.0);
  EXPECT_NEAR(composition_hpe(pred, gt, 4), 0.3, 1e-12);

  std::vector<PoseDelta> exact(19);
  for (std::size_t k = 0; k < exact.size(); ++k) exact[k] = transform_to_pose(gt[k].inverse() * gt[k + 1]);
  EXPECT_EQ(composition_hpe(exact, gt, 4), 0.0);

  EXPECT_THROW(composition_hpe(pred, gt, 1), ConfigError);
  EXPECT_THROW(composition_hpe(pred, std::span(gt).first(19), 4), ContractError);
  EXPECT_THROW(composition_hpe(std::span(pred).first(2), std::span(gt).first(3), 4), ContractError);
}

TEST(Evaluation, ShortTrajectoriesAreRejected) {
  const auto gt = straight_line(20, 0.1);
  const auto lengths = drift_lengths(true);
  EXPECT_THROW(kitti_drift(gt, gt, lengths), ContractError);
  EXPECT_THROW(kitti_drift(gt, std::span(gt).first(10), lengths), ContractError);
  EXPECT_EQ(drift_lengths(false).front(), 100.0);
  EXPECT_EQ(drift_lengths(false).back(), 800.0);
}

TEST(Evaluation, MergeWeightsBySegmentCount) {
  const auto a_gt = straight_line(300, 0.5), b_gt = straight_line(600, 0.5);
  std::vector<SE3Transform> a_pred, b_pred;
  for (const auto& p : a_gt) a_pred.emplace_back(Eigen::Matrix3d::Identity(), 1.01 * p.translation());
  for (const auto& p : b_gt) b_pred.emplace_back(Eigen::Matrix3d::Identity(), 1.03 * p.translation());
  const std::vector<double> ten{10.0};
  const DriftResult a = kitti_drift(a_pred, a_gt, ten), b = kitti_drift(b_pred, b_gt, ten);
  const DriftResult parts[] = {a, b};
  const DriftResult m = merge_drift(parts);
  const double na = static_cast<double>(a.per_length[0].segments), nb = static_cast<double>(b.per_length[0].segments);
  EXPECT_EQ(m.per_length[0].segments, a.per_length[0].segments + b.per_length[0].segments);
  EXPECT_NEAR(m.per_length[0].t_rel_percent, (1.0 * na + 3.0 * nb) / (na + nb), 1e-9);
}

TEST(Evaluation, AccumulateMatchesExplicitProducts) {
  const auto still = accumulate_trajectory(std::vector<PoseDelta>(5));
  for (const auto& p : still) EXPECT_EQ(p.matrix(), Eigen::Matrix4d::Identity());

  std::vector<PoseDelta> forward(4);
  for (auto& r : forward) r.t = Eigen::Vector3d(1, 0, 0);
  const auto line = accumulate_trajectory(forward);
  for (std::size_t k = 0; k < line.size(); ++k) EXPECT_EQ(line[k].translation(), Eigen::Vector3d(double(k), 0, 0));

  Rng rng(9);
  std::vector<PoseDelta> rel(500);
  for (auto& r : rel) {
    r.t = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    r.psi = Eigen::Vector3d(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
  }
  const auto poses = accumulate_trajectory(rel);
  Eigen::Matrix4d brute = Eigen::Matrix4d::Identity();
  double worst = 0.0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    brute = brute * pose_to_transform(rel[k]).matrix();
    worst = std::max(worst, (poses[k + 1].matrix() - brute).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Evaluation, HpeMatchesScalarRecomputation) {
  const auto gt = wandering_path(3, 300);
  const auto pred = perturbed(gt, 33);
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double dx = pred[i].matrix()(0, 3) - gt[i].matrix()(0, 3);
    const double dy = pred[i].matrix()(1, 3) - gt[i].matrix()(1, 3);
    sum += dx * dx + dy * dy;
  }
  EXPECT_NEAR(hpe(pred, gt), std::sqrt(sum / static_cast<double>(gt.size())), 1e-12);
}

TEST(Evaluation, AccumulateStaysOnRotationGroup) {
  std::vector<PoseDelta> rel(1000);
  for (auto& r : rel) {
    r.t = Eigen::Vector3d(0.1, 0, 0);
    r.psi = Eigen::Vector3d(0.01, 0.02, 0.03);
  }
  const auto poses = accumulate_trajectory(rel);
  ASSERT_EQ(poses.size(), 1001u);
  EXPECT_TRUE(poses.back().is_valid(1e-12));
}

TEST(Evaluation, ReportsAreDeterministic) {
  TempDir dir("report");
  EvalReport report;
  const auto gt = wandering_path(7, 300);
  report.drift = kitti_drift(perturbed(gt, 8), gt, drift_lengths(true));
  report.hpe_m = 1.25;
  report.frame_count = gt.size();
  report.config = {{"model.fusion_mode", "ema"}, {"eval.lengths", "desk"}};
  emit_report(report, dir / "a.json");
  emit_report(report, dir / "b.json");
  EXPECT_EQ(read_bytes(dir / "a.json"), read_bytes(dir / "b.json"));
  EXPECT_EQ(report_csv_path(dir / "a.json"), dir / "a.csv");
  const std::string csv = read_bytes(dir / "a.csv");
  EXPECT_EQ(csv.rfind("length_m,t_rel_percent,r_rel_deg_per_100m,segments\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), report.drift.per_length.size() + 1);

  const EvalReport back = read_report(dir / "a.json");
  EXPECT_EQ(back.hpe_m, report.hpe_m);
  EXPECT_EQ(back.frame_count, report.frame_count);
  EXPECT_EQ(back.config, report.config);
  ASSERT_EQ(back.drift.per_length.size(), report.drift.per_length.size());
  EXPECT_EQ(back.drift.t_rel_avg, report.drift.t_rel_avg);
  EXPECT_EQ(back.drift.per_length[0].segments, report.drift.per_length[0].segments);
}

}  // namespace
