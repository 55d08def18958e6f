#include "emavio/encoders.hpp"

#include <tuple>

#include "emavio/error.hpp"
#include "emavio/geometry.hpp"

namespace emavio {

Tensor stack_pair(const FramePair& pair) {
  if (pair.reference.shape() != pair.target.shape() || pair.reference.rank() != 3) {
    throw DimensionError("stack_pair: reference " + shape_str(pair.reference.shape()) + " vs target " +
                         shape_str(pair.target.shape()));
  }
  return ops::concat({pair.reference, pair.target}, 0);
}

std::array<std::size_t, VisualEncoder::kLayers> VisualEncoder::layer_channels(std::size_t base) {
  return {base, 2 * base, 2 * base, 4 * base, 4 * base, 4 * base};
}

VisualEncoder::VisualEncoder(const VisualEncoderConfig& config, ParameterSet& params, Rng& rng,
                             const std::string& prefix)
    : config_(config) {
  if (config.height < kMinImageSize || config.width < kMinImageSize) {
    throw ConfigError("visual encoder: images must be at least " + std::to_string(kMinImageSize) + "x" +
                      std::to_string(kMinImageSize) + ", got " + std::to_string(config.height) + "x" +
                      std::to_string(config.width));
  }
  if (config.channels == 0 || config.base_channels == 0 || config.feature_dim == 0) {
    throw ConfigError("visual encoder: channel counts and feature_dim must be positive");
  }
  const auto widths = layer_channels(config.base_channels);
  std::size_t in = 2 * config.channels;
  for (std::size_t l = 0; l < kLayers; ++l) {
    const std::string name = prefix + ".conv" + std::to_string(l + 1);
    weights_[l] = params.add_uniform(name + ".weight", {widths[l], in, 3, 3}, in * 9, rng);
    biases_[l] = params.add_uniform(name + ".bias", {widths[l]}, in * 9, rng);
    in = widths[l];
  }
  proj_weight_ = params.add_uniform(prefix + ".proj.weight", {config.feature_dim, in}, in, rng);
  proj_bias_ = params.add_uniform(prefix + ".proj.bias", {config.feature_dim}, in, rng);
}

Tensor VisualEncoder::encode(const FramePair& pair) const { return encode_stacked(stack_pair(pair)); }

Tensor VisualEncoder::encode_stacked(const Tensor& stacked) const {
  const Shape expected{2 * config_.channels, config_.height, config_.width};
  if (stacked.shape() != expected) {
    throw ConfigError("visual encoder: expected stacked pair " + shape_str(expected) + ", got " +
                      shape_str(stacked.shape()));
  }
  Tensor x = stacked;
  for (std::size_t l = 0; l < kLayers; ++l) x = ops::relu(ops::conv2d(x, weights_[l], biases_[l], kStrides[l], 1));
  const std::size_t c = x.dim(0);
  const Tensor pooled = ops::mean_axis(ops::reshape(x, {c, x.dim(1) * x.dim(2)}), 1);
  return ops::linear(pooled, proj_weight_, proj_bias_);
}

std::size_t VisualEncoder::macs() const {
  const auto widths = layer_channels(config_.base_channels);
  std::size_t h = config_.height, w = config_.width, in = 2 * config_.channels, total = 0;
  for (std::size_t l = 0; l < kLayers; ++l) {
    h = (h - 1) / kStrides[l] + 1;
    w = (w - 1) / kStrides[l] + 1;
    total += widths[l] * in * 9 * h * w;
    in = widths[l];
  }
  return total + in * config_.feature_dim;
}

std::pair<Tensor, Tensor> wavenet_layer(const Tensor& x, const WaveNetLayerWeights& w) {
  const Tensor z = ops::gated_activation(x, w.filter_weight, w.filter_bias, w.gate_weight, w.gate_bias, w.dilation);
  Tensor skip = ops::conv1d_causal(z, w.skip_weight, w.skip_bias, 1);
  if (!w.residual_weight.defined()) return {x, std::move(skip)};
  const Tensor res = ops::conv1d_causal(z, w.residual_weight, w.residual_bias, 1);
  if (res.shape() != x.shape()) {
    throw DimensionError("wavenet_layer: residual " + shape_str(res.shape()) + " vs input " + shape_str(x.shape()));
  }
  return {ops::add(x, res), std::move(skip)};
}

InertialEncoder::InertialEncoder(const InertialEncoderConfig& config, ParameterSet& params, Rng& rng,
                                 const std::string& prefix)
    : config_(config) {
  if (config.window == 0) throw ConfigError("inertial encoder: window must be positive");
  if (config.feature_dim == 0) throw ConfigError("inertial encoder: feature_dim must be positive");
  if (config.use_wavenet) {
    if (config.kernel == 0 || config.layers == 0 || config.channels == 0) {
      throw ConfigError("inertial encoder: kernel, layers and channels must be positive");
    }
    const std::size_t c = config.channels;
    input_weight_ = params.add_uniform(prefix + ".input.weight", {c, kImuChannels, 1}, kImuChannels, rng);
    input_bias_ = params.add_uniform(prefix + ".input.bias", {c}, kImuChannels, rng);
    const std::size_t fan = c * config.kernel;
    for (std::size_t k = 0; k < config.layers; ++k) {
      const std::string name = prefix + ".layer" + std::to_string(k);
      WaveNetLayerWeights w;
      w.dilation = std::size_t{1} << k;
      w.filter_weight = params.add_uniform(name + ".filter_weight", {c, c, config.kernel}, fan, rng);
      w.filter_bias = params.add_uniform(name + ".filter_bias", {c}, fan, rng);
      w.gate_weight = params.add_uniform(name + ".gate_weight", {c, c, config.kernel}, fan, rng);
      w.gate_bias = params.add_uniform(name + ".gate_bias", {c}, fan, rng);
      w.skip_weight = params.add_uniform(name + ".skip_weight", {c, c, 1}, c, rng);
      w.skip_bias = params.add_uniform(name + ".skip_bias", {c}, c, rng);
      if (k + 1 < config.layers) {
        w.residual_weight = params.add_uniform(name + ".residual_weight", {c, c, 1}, c, rng);
        w.residual_bias = params.add_uniform(name + ".residual_bias", {c}, c, rng);
      }
      layers_.push_back(std::move(w));
    }
    proj_weight_ = params.add_uniform(prefix + ".proj.weight", {config.feature_dim, c}, c, rng);
    proj_bias_ = params.add_uniform(prefix + ".proj.bias", {config.feature_dim}, c, rng);
  } else {
    const std::size_t h = config.lstm_hidden;
    if (h == 0) throw ConfigError("inertial encoder: lstm_hidden must be positive");
    lstm_.input = params.add_uniform(prefix + ".lstm.input_weight", {4 * h, kImuChannels}, h, rng);
    lstm_.hidden = params.add_uniform(prefix + ".lstm.hidden_weight", {4 * h, h}, h, rng);
    lstm_.bias = params.add_uniform(prefix + ".lstm.bias", {4 * h}, h, rng);
    proj_weight_ = params.add_uniform(prefix + ".proj.weight", {config.feature_dim, h}, h, rng);
    proj_bias_ = params.add_uniform(prefix + ".proj.bias", {config.feature_dim}, h, rng);
  }
  if (config.normalize_input) {
    const std::size_t L = config.window;
    std::vector<double> scale(kImuChannels * L, 1.0), offset(kImuChannels * L, 0.0);
    for (std::size_t k = 0; k < 3 * L; ++k) scale[3 * L + k] = 1.0 / kGravity;
    for (std::size_t k = 0; k < L; ++k) offset[5 * L + k] = -1.0;
    input_scale_ = Tensor({kImuChannels, L}, std::move(scale));
    input_offset_ = Tensor({kImuChannels, L}, std::move(offset));
  }
}

void InertialEncoder::check_window(const Tensor& imu) const {
  if (imu.rank() != 2 || imu.dim(0) != kImuChannels || imu.dim(1) != config_.window) {
    throw ContractError("inertial encoder: expected IMU window [6x" + std::to_string(config_.window) + "], got " +
                        shape_str(imu.shape()));
  }
}

Tensor InertialEncoder::normalized(const Tensor& imu) const {
  if (!config_.normalize_input) return imu;
  return ops::add(ops::mul(imu, input_scale_), input_offset_);
}

Tensor InertialEncoder::pre_pool(const Tensor& imu) const {
  check_window(imu);
  if (!config_.use_wavenet) throw ContractError("inertial encoder: pre_pool is defined for the WaveNet encoder only");
  Tensor x = ops::conv1d_causal(normalized(imu), input_weight_, input_bias_, 1);
  Tensor skips;
  for (const auto& layer : layers_) {
    auto [residual, skip] = wavenet_layer(x, layer);
    skips = skips.defined() ? ops::add(skips, skip) : skip;
    x = residual;
  }
  return ops::relu(skips);
}

Tensor InertialEncoder::encode(const Tensor& imu) const {
  check_window(imu);
  if (config_.use_wavenet) {
    return ops::linear(ops::mean_axis(pre_pool(imu), 1), proj_weight_, proj_bias_);
  }
  const std::size_t h = config_.lstm_hidden;
  Tensor hidden = Tensor::zeros({h});
  Tensor cell = Tensor::zeros({h});
  const Tensor input = normalized(imu);
  for (std::size_t t = 0; t < config_.window; ++t) {
    const Tensor x = ops::reshape(ops::slice(input, 1, t, t + 1), {kImuChannels});
    std::tie(hidden, cell) = ops::lstm_cell(x, hidden, cell, lstm_);
  }
  return ops::linear(hidden, proj_weight_, proj_bias_);
}

std::size_t InertialEncoder::receptive_field() const {
  if (!config_.use_wavenet) return config_.window;
  return 1 + (config_.kernel - 1) * ((std::size_t{1} << config_.layers) - 1);
}

std::size_t InertialEncoder::macs() const {
  const std::size_t L = config_.window, d = config_.feature_dim;
  if (!config_.use_wavenet) {
    const std::size_t h = config_.lstm_hidden;
    return L * 4 * h * (kImuChannels + h) + h * d;
  }
  const std::size_t c = config_.channels;
  std::size_t total = kImuChannels * c * L;
  for (const auto& layer : layers_) {
    total += 2 * c * c * config_.kernel * L + c * c * L;
    if (layer.residual_weight.defined()) total += c * c * L;
  }
  return total + c * d;
}

}  // namespace emavio
