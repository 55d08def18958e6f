#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emavio/rng.hpp"
#include "emavio/tensor.hpp"

namespace emavio {

struct Parameter {
  std::string name;  // dotted path, e.g. "inertial.layer2.gate_weight"
  Tensor value;      // leaf with requires_grad
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t step_count = 0;
};

// Ordered collection of named trainable tensors. Registration order is the
// serialization order of checkpoints.
class ParameterSet {
 public:
  // Uniform in +-1/sqrt(fan_in).
  Tensor add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor add_zeros(const std::string& name, Shape shape);

  std::span<Parameter> all() { return params_; }
  std::span<const Parameter> all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  // Sum of element counts.
  std::size_t total_count() const;
  std::size_t count_with_prefix(const std::string& prefix) const;

  void zero_grad();
  std::vector<Tensor> tensors() const;

 private:
  Tensor add(const std::string& name, Tensor value);
  std::vector<Parameter> params_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected ADAM update of every parameter, then clears the gradients.
// Throws ContractError naming the first parameter without a gradient.
void adam_step(std::span<Parameter> params, const AdamConfig& config);

// L2 norm over all parameter gradients (missing gradients count as zero).
double gradient_norm(std::span<const Parameter> params);

}  // namespace emavio
