#pragma once

// KITTI odometry pose files: one line per frame, 12 reals forming the
// row-major 3x4 matrix [R | t] of world-from-camera.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "emavio/geometry.hpp"

namespace emavio {

// 12 significant digits, single spaces, negative zero printed as 0.
std::string format_kitti_line(const SE3Transform& pose);
// Throws ParseError (with `line_number`) unless the text holds exactly 12 reals.
SE3Transform parse_kitti_line(const std::string& text, std::size_t line_number);

void write_kitti_poses(std::ostream& out, std::span<const SE3Transform> poses);
void write_kitti_poses(const std::filesystem::path& path, std::span<const SE3Transform> poses);
// Blank lines are skipped; line numbers in errors count them.
std::vector<SE3Transform> read_kitti_poses(std::istream& in);
std::vector<SE3Transform> read_kitti_poses(const std::filesystem::path& path);

}  // namespace emavio
