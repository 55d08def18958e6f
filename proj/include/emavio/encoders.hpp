#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "emavio/ops.hpp"
#include "emavio/parameter.hpp"
#include "emavio/rng.hpp"
#include "emavio/tensor.hpp"

namespace emavio {

// Reference and target images, each channels x height x width in [0, 1].
struct FramePair {
  Tensor reference;
  Tensor target;
};

// Channel-wise stack [reference; target] -> 2C x H x W.
Tensor stack_pair(const FramePair& pair);

struct VisualEncoderConfig {
  std::size_t channels = 1;  // per image
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t base_channels = 16;
  std::size_t feature_dim = 128;  // d_v
};

// Six 3x3 conv + ReLU layers (FlowNetS-style strides 2,2,2,1,2,1 with
// widths b,2b,2b,4b,4b,4b), global average pooling, linear map to d_v.
class VisualEncoder {
 public:
  static constexpr std::size_t kLayers = 6;
  static constexpr std::size_t kMinImageSize = 16;

  VisualEncoder(const VisualEncoderConfig& config, ParameterSet& params, Rng& rng,
                const std::string& prefix = "visual");

  Tensor encode(const FramePair& pair) const;
  // stacked: 2C x H x W
  Tensor encode_stacked(const Tensor& stacked) const;

  std::size_t macs() const;
  const VisualEncoderConfig& config() const { return config_; }

  static std::array<std::size_t, kLayers> layer_channels(std::size_t base);
  static constexpr std::array<std::size_t, kLayers> kStrides{2, 2, 2, 1, 2, 1};

 private:
  VisualEncoderConfig config_;
  std::array<Tensor, kLayers> weights_;
  std::array<Tensor, kLayers> biases_;
  Tensor proj_weight_;
  Tensor proj_bias_;
};

// Weights of one residual/skip WaveNet block. 1x1 convolutions are stored as
// kernel-1 causal convolutions. `residual_weight` is undefined on the last
// layer, whose residual stream has no consumer.
struct WaveNetLayerWeights {
  Tensor filter_weight, filter_bias;
  Tensor gate_weight, gate_bias;
  Tensor skip_weight, skip_bias;
  Tensor residual_weight, residual_bias;
  std::size_t dilation = 1;
};

// z = gated_activation(x); skip = 1x1(z); residual = x + 1x1(z) (or x when the
// layer carries no residual projection).
std::pair<Tensor, Tensor> wavenet_layer(const Tensor& x, const WaveNetLayerWeights& w);

struct InertialEncoderConfig {
  std::size_t window = 11;  // IMU samples per inter-frame interval, L
  std::size_t channels = 64;
  std::size_t layers = 4;
  std::size_t kernel = 2;
  std::size_t feature_dim = 128;  // d_i
  std::size_t lstm_hidden = 64;
  bool use_wavenet = true;  // false: LSTM over the window (ablation baseline)
  // Accelerometer rows become (acc - (0, 0, g)) / g before encoding; gyro rows
  // pass through in rad/s.
  bool normalize_input = true;
};

inline constexpr std::size_t kImuChannels = 6;

class InertialEncoder {
 public:
  InertialEncoder(const InertialEncoderConfig& config, ParameterSet& params, Rng& rng,
                  const std::string& prefix = "inertial");

  // imu: 6 x L, rows [gyro_xyz, acc_xyz]. Throws ContractError on L mismatch.
  Tensor encode(const Tensor& imu) const;
  // WaveNet mode only: ReLU(sum of skip outputs), channels x L, before pooling.
  Tensor pre_pool(const Tensor& imu) const;

  std::size_t receptive_field() const;
  std::size_t macs() const;
  const InertialEncoderConfig& config() const { return config_; }
  const std::vector<WaveNetLayerWeights>& layers() const { return layers_; }

 private:
  void check_window(const Tensor& imu) const;
  Tensor normalized(const Tensor& imu) const;

  InertialEncoderConfig config_;
  Tensor input_weight_, input_bias_;
  std::vector<WaveNetLayerWeights> layers_;
  ops::LstmWeights lstm_;
  Tensor proj_weight_, proj_bias_;
  Tensor input_scale_, input_offset_;
};

}  // namespace emavio
