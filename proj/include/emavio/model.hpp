#pragma once

// Full network: visual and inertial encoders, token fusion, pose regressor.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "emavio/config.hpp"
#include "emavio/dataset.hpp"
#include "emavio/encoders.hpp"
#include "emavio/fusion.hpp"
#include "emavio/parameter.hpp"
#include "emavio/rng.hpp"

namespace emavio {

struct BlockLedger {
  std::string name;  // visual, inertial, fusion, regressor
  std::size_t params = 0;
  std::size_t macs = 0;  // multiply-accumulates per frame pair
};

class EmaVioModel {
 public:
  // Parameters are drawn from one stream seeded by `seed`, in block order.
  EmaVioModel(const ModelConfig& config, std::uint64_t seed);

  // Relative pose [6] (t then psi) for one frame pair and its IMU window.
  Tensor forward_pair(const FramePair& pair, const Tensor& imu, Tensor* attention_map = nullptr) const;
  // n - 1 relative poses. Throws ConfigError naming the stage whose input
  // dimensions disagree with the config.
  std::vector<Tensor> forward(const SequenceSample& sample) const;
  void check_sample(const SequenceSample& sample) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const ModelConfig& config() const { return config_; }

  std::vector<BlockLedger> ledger() const;

 private:
  EmaVioModel(const ModelConfig& config, Rng&& rng);

  ModelConfig config_;
  ParameterSet params_;
  VisualEncoder visual_;
  InertialEncoder inertial_;
  FusionBlock fusion_;
  PoseRegressor regressor_;
};

// Ledger for `config` without keeping the model.
std::vector<BlockLedger> parameter_ledger(const ModelConfig& config);

}  // namespace emavio
