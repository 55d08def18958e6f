#include "emavio/model.hpp"

#include "emavio/error.hpp"

namespace emavio {

namespace {

const ModelConfig& checked(const ModelConfig& c) {
  if (c.visual.feature_dim + c.inertial.feature_dim != c.fusion.tokens * c.fusion.token_dim) {
    throw ConfigError("model: fusion stage expects " + std::to_string(c.fusion.tokens * c.fusion.token_dim) +
                      " concatenated features, encoders produce " +
                      std::to_string(c.visual.feature_dim + c.inertial.feature_dim));
  }
  return c;
}

}  // namespace

EmaVioModel::EmaVioModel(const ModelConfig& config, std::uint64_t seed) : EmaVioModel(config, Rng(seed)) {}

EmaVioModel::EmaVioModel(const ModelConfig& config, Rng&& rng)
    : config_(checked(config)),
      visual_(config.visual, params_, rng),
      inertial_(config.inertial, params_, rng),
      fusion_(config.fusion, params_, rng),
      regressor_(fusion_.output_size(), config.regressor_hidden, params_, rng) {}

Tensor EmaVioModel::forward_pair(const FramePair& pair, const Tensor& imu, Tensor* attention_map) const {
  const Tensor fv = visual_.encode(pair);
  const Tensor fi = inertial_.encode(imu);
  const Tensor tokens = fuse_concat(fv, fi, config_.fusion.tokens, config_.fusion.token_dim);
  return regressor_.forward(fusion_.forward(tokens, attention_map));
}

void EmaVioModel::check_sample(const SequenceSample& sample) const {
  if (sample.frames.size() != sample.imu.size() || sample.frames.size() != sample.gt_rel.size() ||
      sample.frames.empty()) {
    throw ConfigError("model: sample has " + std::to_string(sample.frames.size()) + " frame pairs, " +
                      std::to_string(sample.imu.size()) + " IMU windows and " + std::to_string(sample.gt_rel.size()) +
                      " relative poses");
  }
  const Shape image{config_.visual.channels, config_.visual.height, config_.visual.width};
  const Shape imu{kImuChannels, config_.inertial.window};
  for (std::size_t i = 0; i < sample.frames.size(); ++i) {
    if (sample.frames[i].reference.shape() != image || sample.frames[i].target.shape() != image) {
      throw ConfigError("model: visual stage expects images " + shape_str(image) + ", sample has " +
                        shape_str(sample.frames[i].reference.shape()));
    }
    if (sample.imu[i].shape() != imu) {
      throw ConfigError("model: inertial stage expects IMU windows " + shape_str(imu) + ", sample has " +
                        shape_str(sample.imu[i].shape()));
    }
  }
}

std::vector<Tensor> EmaVioModel::forward(const SequenceSample& sample) const {
  check_sample(sample);
  std::vector<Tensor> out;
  out.reserve(sample.frames.size());
  for (std::size_t i = 0; i < sample.frames.size(); ++i) out.push_back(forward_pair(sample.frames[i], sample.imu[i]));
  return out;
}

std::vector<BlockLedger> EmaVioModel::ledger() const {
  return {
      {"visual", params_.count_with_prefix("visual."), visual_.macs()},
      {"inertial", params_.count_with_prefix("inertial."), inertial_.macs()},
      {"fusion", params_.count_with_prefix("fusion."), fusion_.macs()},
      {"regressor", params_.count_with_prefix("regressor."), regressor_.macs()},
  };
}

std::vector<BlockLedger> parameter_ledger(const ModelConfig& config) { return EmaVioModel(config, 0).ledger(); }

}  // namespace emavio
