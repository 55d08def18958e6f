#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "emavio/tensor.hpp"

namespace emavio {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_tensor = 0;  // index into the checked tensor list
  std::size_t worst_coord = 0;
};

// Compares reverse-mode gradients of the scalar returned by `graph_fn` with
// central differences over the given leaf tensors. The relative error of one
// coordinate is |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
//
// graph_fn is evaluated twice up front; a different result marks it unusable
// and raises ContractError. Leaves' gradients are cleared before and after.
GradCheckResult finite_diff_check(const std::function<Tensor()>& graph_fn, std::vector<Tensor> leaves,
                                  const GradCheckOptions& options = {});

}  // namespace emavio
