#include "emavio/kitti.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "emavio/error.hpp"

namespace emavio {

std::string format_kitti_line(const SE3Transform& pose) {
  const Eigen::Matrix4d& m = pose.matrix();
  std::string line;
  char buf[32];
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 4; ++col) {
      if (!line.empty()) line += ' ';
      // + 0.0 folds -0 into 0.
      std::snprintf(buf, sizeof buf, "%.12g", m(row, col) + 0.0);
      line += buf;
    }
  }
  return line;
}

SE3Transform parse_kitti_line(const std::string& text, std::size_t line_number) {
  double v[12];
  std::size_t count = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (true) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p == end) break;
    double value = 0.0;
    const auto res = std::from_chars(p, end, value);
    if (res.ec != std::errc{}) throw ParseError("kitti: unreadable number", line_number);
    if (count < 12) v[count] = value;
    ++count;
    p = res.ptr;
    if (p < end && *p != ' ' && *p != '\t' && *p != '\r') throw ParseError("kitti: unreadable number", line_number);
  }
  if (count != 12) {
    throw ParseError("kitti: expected 12 fields, found " + std::to_string(count), line_number);
  }
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 4; ++col) m(row, col) = v[row * 4 + col];
  return SE3Transform(m);
}

void write_kitti_poses(std::ostream& out, std::span<const SE3Transform> poses) {
  for (const auto& p : poses) out << format_kitti_line(p) << '\n';
}

void write_kitti_poses(const std::filesystem::path& path, std::span<const SE3Transform> poses) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_kitti_poses(out, poses);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<SE3Transform> read_kitti_poses(std::istream& in) {
  std::vector<SE3Transform> poses;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    poses.push_back(parse_kitti_line(line, number));
  }
  return poses;
}

std::vector<SE3Transform> read_kitti_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_kitti_poses(in);
}

}  // namespace emavio
