#pragma once

// Versioned binary checkpoint: config echo, step, and every parameter with
// its ADAM moments, in registration order.

#include <cstdint>
#include <filesystem>
#include <string>

#include "emavio/config.hpp"
#include "emavio/parameter.hpp"

namespace emavio {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Writes to a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Config& config, const ParameterSet& params,
                     std::uint64_t step);

struct CheckpointHeader {
  std::uint32_t version = 0;
  std::string config_text;  // Config::serialize() of the saving run
  std::uint64_t step = 0;
};

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

// Restores values, moments and step counts into `params`, returning the step.
// Throws ConfigError when the checkpoint's [model] section differs from the
// active config's or a parameter name/shape disagrees; IoError on damage.
std::uint64_t load_checkpoint(const std::filesystem::path& path, const Config& active, ParameterSet& params);

}  // namespace emavio
