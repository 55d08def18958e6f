#pragma once

// Run configuration: an INI file with sections [model], [loss], [optim],
// [train], [eval] and [synth]. Every key has a default; unknown sections or
// keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "emavio/dataset.hpp"
#include "emavio/encoders.hpp"
#include "emavio/fusion.hpp"
#include "emavio/parameter.hpp"

namespace emavio {

enum class Precision { kF32, kF64 };
Precision parse_precision(const std::string& text);
std::string to_string(Precision precision);

struct ModelConfig {
  VisualEncoderConfig visual;
  InertialEncoderConfig inertial;
  FusionConfig fusion;
  std::size_t regressor_hidden = 128;
};

struct LossConfig {
  double lambda1 = 100.0;
  double lambda2 = 100.0;
  bool use_multistate = true;
  std::size_t sequence_length = 5;  // frames per sample, n
};

struct OptimConfig {
  AdamConfig adam;
  std::size_t batch_size = 4;
  std::size_t steps = 200;
  std::size_t checkpoint_every = 50;
};

struct TrainConfig {
  std::uint64_t seed = 1;
  Precision precision = Precision::kF32;
  bool log_wall_time = false;
  std::size_t window_stride = 1;
};

struct EvalConfig {
  bool desk_scale = true;  // lengths = desk (10..80 m) or full (100..800 m)
  std::size_t stride = 1;
};

struct Config {
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  TrainConfig train;
  EvalConfig eval;
  DatasetSpec synth;

  // Throws ConfigError on syntax errors, unknown keys or invalid values.
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  // Canonical text: every section and key in a fixed order.
  std::string serialize() const;
  std::string section(const std::string& name) const;
  // "section.key" -> value for every field.
  std::map<std::string, std::string> echo() const;

  void validate() const;
};

}  // namespace emavio
