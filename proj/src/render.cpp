#include "emavio/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "emavio/error.hpp"
#include "emavio/rng.hpp"

namespace emavio {

namespace {

struct Grating {
  double fx, fy, phase, amplitude;
};

double sample_bilinear(const Image& img, std::size_t height, std::size_t width, double x, double y) {
  const double x0f = std::floor(x), y0f = std::floor(y);
  const double fx = x - x0f, fy = y - y0f;
  const auto x0 = static_cast<long>(x0f), y0 = static_cast<long>(y0f);
  auto at = [&](long yy, long xx) -> double {
    if (xx < 0 || yy < 0 || xx >= static_cast<long>(width) || yy >= static_cast<long>(height)) return 0.0;
    return img[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)];
  };
  const double top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1);
  const double bottom = (1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1);
  return (1.0 - fy) * top + fy * bottom;
}

}  // namespace

Image procedural_texture(std::uint64_t seed, std::size_t height, std::size_t width) {
  Rng rng(seed, 0x74657874ULL);
  std::array<Grating, 4> gratings{};
  double total = 0.0;
  for (auto& g : gratings) {
    const double period = rng.uniform(6.0, 12.0);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    g.fx = std::cos(angle) / period;
    g.fy = std::sin(angle) / period;
    g.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    g.amplitude = rng.uniform(0.5, 1.0);
    total += g.amplitude;
  }
  Image img(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double v = 0.0;
      for (const auto& g : gratings) {
        v += g.amplitude *
             std::sin(2.0 * std::numbers::pi * (g.fx * static_cast<double>(x) + g.fy * static_cast<double>(y)) + g.phase);
      }
      img[y * width + x] = static_cast<float>(0.5 + 0.5 * v / total);
    }
  }
  return img;
}

double warp_magnitude(const PoseDelta& pose, std::size_t height, std::size_t width, double pixels_per_meter) {
  const double cx = 0.5 * static_cast<double>(width - 1), cy = 0.5 * static_cast<double>(height - 1);
  const double c = std::cos(pose.psi.z()), s = std::sin(pose.psi.z());
  const double sx = pixels_per_meter * pose.t.x(), sy = pixels_per_meter * pose.t.y();
  double worst = 0.0;
  for (double dx : {-cx, cx}) {
    for (double dy : {-cy, cy}) {
      const double mx = c * dx - s * dy + sx - dx;
      const double my = s * dx + c * dy + sy - dy;
      worst = std::max(worst, std::hypot(mx, my));
    }
  }
  return worst;
}

Image warp_image(const Image& source, std::size_t height, std::size_t width, const PoseDelta& pose,
                 double pixels_per_meter) {
  if (source.size() != height * width) throw DimensionError("warp_image: image size does not match dimensions");
  const double limit = static_cast<double>(std::min(height, width)) / 4.0;
  const double magnitude = warp_magnitude(pose, height, width, pixels_per_meter);
  if (magnitude > limit) {
    throw ConfigError("render: warp moves pixels by " + std::to_string(magnitude) + " px, above the limit of " +
                      std::to_string(limit) + " px");
  }
  const double cx = 0.5 * static_cast<double>(width - 1), cy = 0.5 * static_cast<double>(height - 1);
  const double c = std::cos(pose.psi.z()), s = std::sin(pose.psi.z());
  const double sx = pixels_per_meter * pose.t.x(), sy = pixels_per_meter * pose.t.y();
  Image out(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      const double u = c * dx - s * dy + cx + sx;
      const double v = s * dx + c * dy + cy + sy;
      out[y * width + x] = static_cast<float>(sample_bilinear(source, height, width, u, v));
    }
  }
  return out;
}

ImagePair render_frame_pair(const PoseDelta& pose, std::uint64_t texture_seed, const RenderSpec& spec) {
  ImagePair pair;
  pair.reference = procedural_texture(texture_seed, spec.height, spec.width);
  pair.target = warp_image(pair.reference, spec.height, spec.width, pose, spec.pixels_per_meter);
  return pair;
}

FramePair to_frame_pair(const ImagePair& images, std::size_t height, std::size_t width) {
  const Shape shape{1, height, width};
  return {Tensor(shape, std::vector<double>(images.reference.begin(), images.reference.end())),
          Tensor(shape, std::vector<double>(images.target.begin(), images.target.end()))};
}

}  // namespace emavio
