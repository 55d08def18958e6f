#include "emavio/parameter.hpp"

#include <cmath>

#include "emavio/error.hpp"

namespace emavio {

Tensor ParameterSet::add(const std::string& name, Tensor value) {
  if (find(name)) throw ConfigError("parameter '" + name + "' registered twice");
  Parameter p;
  p.name = name;
  p.adam_m.assign(value.numel(), 0.0);
  p.adam_v.assign(value.numel(), 0.0);
  p.value = value;
  params_.push_back(std::move(p));
  return value;
}

Tensor ParameterSet::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return add(name, Tensor(std::move(shape), std::move(values), true));
}

Tensor ParameterSet::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), true));
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::total_count() const { return count_with_prefix(""); }

std::size_t ParameterSet::count_with_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.name.starts_with(prefix)) n += p.value.numel();
  }
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

std::vector<Tensor> ParameterSet::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void adam_step(std::span<Parameter> params, const AdamConfig& config) {
  for (const auto& p : params) {
    if (!p.value.has_grad()) throw ContractError("adam_step: parameter '" + p.name + "' has no gradient");
  }
  for (auto& p : params) {
    ++p.step_count;
    const double t = static_cast<double>(p.step_count);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    auto w = p.value.mutable_data();
    const auto g = p.value.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      p.adam_m[i] = config.beta1 * p.adam_m[i] + (1.0 - config.beta1) * g[i];
      p.adam_v[i] = config.beta2 * p.adam_v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = p.adam_m[i] / c1;
      const double v_hat = p.adam_v[i] / c2;
      w[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
    p.value.zero_grad();
  }
}

double gradient_norm(std::span<const Parameter> params) {
  double acc = 0.0;
  for (const auto& p : params) {
    for (double g : p.value.grad()) acc += g * g;
  }
  return std::sqrt(acc);
}

}  // namespace emavio
