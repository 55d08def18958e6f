#include "emavio/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "emavio/error.hpp"
#include "text_format.hpp"

namespace emavio {

namespace {

constexpr std::size_t kReorthonormalizeEvery = 100;

struct SegmentError {
  double translation = 0.0;
  double angle = 0.0;
};

// Error of pred relative to gt, (pred^-1 gt), without forming the inverse so
// identical inputs give exact zeros.
SegmentError segment_error(const SE3Transform& pred, const SE3Transform& gt) {
  const Eigen::Matrix3d rp = pred.rotation(), rg = gt.rotation();
  const Eigen::Vector3d dt = gt.translation() - pred.translation();
  Eigen::Matrix3d m;
  Eigen::Vector3d t;
  for (int i = 0; i < 3; ++i) {
    t[i] = rp(0, i) * dt[0] + rp(1, i) * dt[1] + rp(2, i) * dt[2];
    for (int j = 0; j < 3; ++j) m(i, j) = rp(0, i) * rg(0, j) + rp(1, i) * rg(1, j) + rp(2, i) * rg(2, j);
  }
  const double s = 0.5 * Eigen::Vector3d(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)).norm();
  const double c = 0.5 * (m.trace() - 1.0);
  return {t.norm(), std::atan2(s, c)};
}

void check_aligned(std::span<const SE3Transform> pred, std::span<const SE3Transform> gt, const char* op) {
  if (pred.size() != gt.size()) {
    throw ContractError(std::string(op) + ": prediction has " + std::to_string(pred.size()) +
                        " poses, ground truth " + std::to_string(gt.size()));
  }
  if (gt.empty()) throw ContractError(std::string(op) + ": empty trajectory");
}

void finish_averages(DriftResult& r) {
  r.t_rel_avg = 0.0;
  r.r_rel_avg = 0.0;
  if (r.per_length.empty()) return;
  for (const auto& l : r.per_length) {
    r.t_rel_avg += l.t_rel_percent;
    r.r_rel_avg += l.r_rel_deg_per_100m;
  }
  r.t_rel_avg /= static_cast<double>(r.per_length.size());
  r.r_rel_avg /= static_cast<double>(r.per_length.size());
}

}  // namespace

std::vector<SE3Transform> accumulate_trajectory(std::span<const PoseDelta> rel, const SE3Transform& origin) {
  std::vector<SE3Transform> out;
  out.reserve(rel.size() + 1);
  out.push_back(origin);
  SE3Transform current = origin;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    current = current * pose_to_transform(rel[k]);
    if ((k + 1) % kReorthonormalizeEvery == 0) current = SE3Transform(orthonormalize(current.rotation()), current.translation());
    out.push_back(current);
  }
  return out;
}

std::vector<double> drift_lengths(bool desk_scale) {
  std::vector<double> out;
  const double unit = desk_scale ? 10.0 : 100.0;
  for (int i = 1; i <= 8; ++i) out.push_back(unit * i);
  return out;
}

DriftResult kitti_drift(std::span<const SE3Transform> pred, std::span<const SE3Transform> gt,
                        std::span<const double> lengths, std::size_t stride) {
  check_aligned(pred, gt, "kitti_drift");
  if (stride == 0) throw ConfigError("kitti_drift: stride must be positive");
  const std::size_t n = gt.size();
  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) dist[i] = dist[i - 1] + (gt[i].translation() - gt[i - 1].translation()).norm();

  DriftResult result;
  for (double length : lengths) {
    if (!(length > 0.0)) throw ConfigError("kitti_drift: lengths must be positive");
    LengthDrift entry;
    entry.length_m = length;
    double t_sum = 0.0, r_sum = 0.0;
    std::size_t last = 0;
    for (std::size_t first = 0; first < n; first += stride) {
      // The end index only moves forward as the start does.
      last = std::max(last, first);
      while (last < n && dist[last] - dist[first] < length) ++last;
      if (last == n) break;
      const SE3Transform gt_delta = gt[first].inverse() * gt[last];
      const SE3Transform pred_delta = pred[first].inverse() * pred[last];
      const SegmentError err = segment_error(pred_delta, gt_delta);
      t_sum += err.translation / length;
      r_sum += err.angle / length;
      ++entry.segments;
    }
    if (entry.segments == 0) continue;
    const double count = static_cast<double>(entry.segments);
    entry.t_rel_percent = 100.0 * t_sum / count;
    entry.r_rel_deg_per_100m = 100.0 * (180.0 / std::numbers::pi) * r_sum / count;
    result.per_length.push_back(entry);
  }
  if (result.per_length.empty()) {
    throw ContractError("kitti_drift: trajectory (" + detail::format_double(dist.back()) +
                        " m) is shorter than every evaluation length; use the desk-scale lengths");
  }
  finish_averages(result);
  return result;
}

DriftResult merge_drift(std::span<const DriftResult> parts) {
  std::map<double, LengthDrift> pooled;
  for (const auto& part : parts) {
    for (const auto& l : part.per_length) {
      auto& p = pooled[l.length_m];
      p.length_m = l.length_m;
      const double w = static_cast<double>(l.segments);
      p.t_rel_percent += w * l.t_rel_percent;
      p.r_rel_deg_per_100m += w * l.r_rel_deg_per_100m;
      p.segments += l.segments;
    }
  }
  DriftResult out;
  for (auto& [length, l] : pooled) {
    l.t_rel_percent /= static_cast<double>(l.segments);
    l.r_rel_deg_per_100m /= static_cast<double>(l.segments);
    out.per_length.push_back(l);
  }
  finish_averages(out);
  return out;
}

double hpe(std::span<const SE3Transform> pred, std::span<const SE3Transform> gt) {
  check_aligned(pred, gt, "hpe");
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const Eigen::Vector3d d = pred[i].translation() - gt[i].translation();
    sum += d.x() * d.x() + d.y() * d.y();
  }
  return std::sqrt(sum / static_cast<double>(gt.size()));
}

double composition_hpe(std::span<const PoseDelta> pred_rel, std::span<const SE3Transform> gt_poses, std::size_t n) {
  if (n < 2) throw ConfigError("composition_hpe: windows need at least 2 frames");
  if (gt_poses.size() != pred_rel.size() + 1) {
    throw ContractError("composition_hpe: " + std::to_string(pred_rel.size()) + " relative poses for " +
                        std::to_string(gt_poses.size()) + " ground-truth poses");
  }
  if (gt_poses.size() < n) throw ContractError("composition_hpe: sequence is shorter than one window");
  std::vector<SE3Transform> pred, gt;
  std::vector<SE3Transform> chain(n - 1);
  for (std::size_t s = 0; s + n <= gt_poses.size(); ++s) {
    for (std::size_t k = 0; k + 1 < n; ++k) chain[k] = pose_to_transform(pred_rel[s + k]);
    pred.push_back(compose_chain(chain));
    gt.push_back(gt_poses[s].inverse() * gt_poses[s + n - 1]);
  }
  return hpe(pred, gt);
}

std::filesystem::path report_csv_path(const std::filesystem::path& path) {
  std::filesystem::path csv = path;
  csv.replace_extension(".csv");
  if (csv == path) csv += ".lengths.csv";
  return csv;
}

void emit_report(const EvalReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  nlohmann::json t_rel = nlohmann::json::object(), r_rel = nlohmann::json::object(),
                 segments = nlohmann::json::object();
  for (const auto& l : report.drift.per_length) {
    const std::string key = detail::format_double(l.length_m);
    t_rel[key] = l.t_rel_percent;
    r_rel[key] = l.r_rel_deg_per_100m;
    segments[key] = l.segments;
  }
  j["t_rel_percent"] = t_rel;
  j["r_rel_deg_per_100m"] = r_rel;
  j["segments"] = segments;
  j["t_rel_avg"] = report.drift.t_rel_avg;
  j["r_rel_avg"] = report.drift.r_rel_avg;
  j["hpe_m"] = report.hpe_m;
  j["composition_hpe_m"] = report.composition_hpe_m;
  j["frame_count"] = report.frame_count;
  j["config"] = report.config;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());

  const auto csv_path = report_csv_path(path);
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw IoError("cannot open " + csv_path.string() + " for writing");
  csv << "length_m,t_rel_percent,r_rel_deg_per_100m,segments\n";
  for (const auto& l : report.drift.per_length) {
    csv << detail::format_double(l.length_m) << ',' << detail::format_double(l.t_rel_percent) << ','
        << detail::format_double(l.r_rel_deg_per_100m) << ',' << l.segments << '\n';
  }
  if (!csv) throw IoError("failed writing " + csv_path.string());
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("report " + path.string() + ": " + e.what());
  }
  EvalReport r;
  try {
    for (const auto& [key, value] : j.at("t_rel_percent").items()) {
      LengthDrift l;
      l.length_m = detail::parse_double(key, "report length");
      l.t_rel_percent = value.get<double>();
      l.r_rel_deg_per_100m = j.at("r_rel_deg_per_100m").at(key).get<double>();
      l.segments = j.at("segments").at(key).get<std::size_t>();
      r.drift.per_length.push_back(l);
    }
    std::sort(r.drift.per_length.begin(), r.drift.per_length.end(),
              [](const LengthDrift& a, const LengthDrift& b) { return a.length_m < b.length_m; });
    r.drift.t_rel_avg = j.at("t_rel_avg").get<double>();
    r.drift.r_rel_avg = j.at("r_rel_avg").get<double>();
    r.hpe_m = j.at("hpe_m").get<double>();
    r.composition_hpe_m = j.at("composition_hpe_m").get<double>();
    r.frame_count = j.at("frame_count").get<std::size_t>();
    r.config = j.at("config").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("report " + path.string() + " does not follow the schema: " + e.what());
  }
  return r;
}

}  // namespace emavio
