#include "emavio/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emavio/error.hpp"
#include "emavio/rng.hpp"

namespace emavio {

namespace {

double evaluate(const std::function<Tensor()>& graph_fn) {
  NoGradGuard guard;
  return graph_fn().item();
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  return idx;
}

}  // namespace

GradCheckResult finite_diff_check(const std::function<Tensor()>& graph_fn, std::vector<Tensor> leaves,
                                  const GradCheckOptions& options) {
  for (auto& t : leaves) {
    if (!t.requires_grad()) throw ContractError("finite_diff_check: leaf does not require grad");
    t.zero_grad();
  }

  const double base = evaluate(graph_fn);
  if (evaluate(graph_fn) != base) {
    throw ContractError("finite_diff_check: graph function is not deterministic; check unusable");
  }

  graph_fn().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& t : leaves) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
    t.zero_grad();
  }

  GradCheckResult result;
  Rng rng(options.seed);
  const double eps = options.epsilon;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    auto values = leaves[k].mutable_data();
    for (std::size_t i : pick_coords(values.size(), options.max_coords_per_tensor, rng)) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = evaluate(graph_fn);
      values[i] = saved - eps;
      const double minus = evaluate(graph_fn);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      ++result.coords_checked;
      if (rel > result.max_relative_error || std::isnan(rel)) {
        result.max_relative_error = std::isnan(rel) ? INFINITY : rel;
        result.worst_tensor = k;
        result.worst_coord = i;
      }
    }
  }
  return result;
}

}  // namespace emavio
