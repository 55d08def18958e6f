#pragma once

// Named finite-difference checks per network block, with per-block
// tolerances: 1e-9 for linear maps, 1e-6 for convolutional, gated, recurrent
// and attention blocks, 1e-4 for losses and the end-to-end model.

#include <functional>
#include <string>
#include <vector>

#include "emavio/config.hpp"
#include "emavio/gradcheck.hpp"

namespace emavio {

struct GradBlock {
  std::string name;
  double tolerance = 0.0;
  std::function<GradCheckResult()> run;
};

struct GradBlockOutcome {
  std::string name;
  double tolerance = 0.0;
  GradCheckResult result;
  bool passed = false;
};

inline constexpr double kLinearTolerance = 1e-9;
inline constexpr double kBlockTolerance = 1e-6;
inline constexpr double kEndToEndTolerance = 1e-4;

// Reduced copy of `config.model` (same modes, toy widths) used for the
// end-to-end check so that every coordinate's gradient is well above
// finite-difference noise.
ModelConfig gradcheck_model_config(const ModelConfig& config);

std::vector<GradBlock> default_gradcheck_blocks(const Config& config);
std::vector<GradBlockOutcome> run_gradcheck_suite(const std::vector<GradBlock>& blocks);

}  // namespace emavio
