#pragma once

// Synthetic frame pairs: a seeded procedural texture and the same texture
// warped by the in-plane part of a relative pose.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "emavio/encoders.hpp"
#include "emavio/geometry.hpp"

namespace emavio {

struct RenderSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  double pixels_per_meter = 20.0;
};

// Single-channel height x width image, row-major, values in [0, 1].
using Image = std::vector<float>;

// Sum of four seeded sinusoid gratings with periods between 6 and 12 pixels.
Image procedural_texture(std::uint64_t seed, std::size_t height, std::size_t width);

// target(u) = source(R(yaw) (u - c) + c + ppm * (t_x, t_y)), with c the image
// centre, bilinear sampling and zero outside the frame. Throws ConfigError
// when some pixel would move by more than min(height, width) / 4.
Image warp_image(const Image& source, std::size_t height, std::size_t width, const PoseDelta& pose,
                 double pixels_per_meter);

// Largest displacement, in pixels, the warp applies to any image corner.
double warp_magnitude(const PoseDelta& pose, std::size_t height, std::size_t width, double pixels_per_meter);

struct ImagePair {
  Image reference;
  Image target;
};

ImagePair render_frame_pair(const PoseDelta& pose, std::uint64_t texture_seed, const RenderSpec& spec);

// 1 x H x W tensors.
FramePair to_frame_pair(const ImagePair& images, std::size_t height, std::size_t width);

}  // namespace emavio
