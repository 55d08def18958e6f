#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "emavio/config.hpp"
#include "emavio/rng.hpp"
#include "emavio/tensor.hpp"

namespace emavio::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("emavio_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Small model and data so that training-path tests run in seconds.
inline Config tiny_config() {
  Config c;
  c.model.visual.height = 16;
  c.model.visual.width = 16;
  c.model.visual.base_channels = 2;
  c.model.visual.feature_dim = 8;
  c.model.inertial.channels = 4;
  c.model.inertial.layers = 2;
  c.model.inertial.feature_dim = 8;
  c.model.inertial.lstm_hidden = 4;
  c.model.fusion.tokens = 2;
  c.model.fusion.token_dim = 8;
  c.model.fusion.memory_slots = 4;
  c.model.fusion.lstm_hidden = 6;
  c.model.regressor_hidden = 8;
  c.optim.batch_size = 2;
  c.optim.steps = 4;
  c.optim.checkpoint_every = 2;
  c.loss.sequence_length = 3;
  c.train.precision = Precision::kF64;
  c.synth.sequences = 2;
  c.synth.test_sequences = 1;
  c.synth.duration_s = 1.0;
  c.synth.test_duration_s = 20.0;
  c.synth.render.height = 16;
  c.synth.render.width = 16;
  c.synth.render.pixels_per_meter = 10.0;
  c.validate();
  return c;
}

}  // namespace emavio::test
