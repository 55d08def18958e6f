#include <gtest/gtest.h>

#include "emavio/encoders.hpp"
#include "emavio/error.hpp"
#include "emavio/geometry.hpp"
#include "emavio/render.hpp"
#include "support.hpp"

namespace {

using namespace emavio;
using emavio::test::random_tensor;

InertialEncoderConfig small_inertial() {
  InertialEncoderConfig c;
  c.channels = 8;
  c.layers = 4;
  c.kernel = 2;
  c.feature_dim = 16;
  return c;
}

TEST(InertialEncoder, ReceptiveFieldOfDilatedStack) {
  ParameterSet params;
  Rng rng(1);
  const InertialEncoder enc(small_inertial(), params, rng);
  EXPECT_EQ(enc.receptive_field(), 16u);
  EXPECT_EQ(enc.layers().size(), 4u);
  EXPECT_EQ(enc.layers()[3].dilation, 8u);
  EXPECT_FALSE(enc.layers()[3].residual_weight.defined());
}

TEST(InertialEncoder, FutureSamplesDoNotReachPastActivations) {
  ParameterSet params;
  Rng rng(2);
  const InertialEncoder enc(small_inertial(), params, rng);
  const std::size_t L = enc.config().window;
  Rng trial_rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor imu = random_tensor({kImuChannels, L}, trial_rng, 5.0);
    const std::size_t t = trial_rng.below(L);
    std::vector<double> changed(imu.data().begin(), imu.data().end());
    for (std::size_t r = 0; r < kImuChannels; ++r) {
      for (std::size_t k = t; k < L; ++k) changed[r * L + k] += trial_rng.uniform(-3.0, 3.0);
    }
    const Tensor a = enc.pre_pool(imu), b = enc.pre_pool(Tensor({kImuChannels, L}, changed));
    const std::size_t c = a.dim(0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t k = 0; k < t; ++k) ASSERT_EQ(a[ch * L + k], b[ch * L + k]) << "trial " << trial;
    }
  }
}

TEST(InertialEncoder, PresentSampleDoesReachItsOwnActivation) {
  ParameterSet params;
  Rng rng(4);
  const InertialEncoder enc(small_inertial(), params, rng);
  const std::size_t L = enc.config().window;
  Rng data(5);
  const Tensor imu = random_tensor({kImuChannels, L}, data);
  std::vector<double> changed(imu.data().begin(), imu.data().end());
  changed[3] += 1.0;
  const Tensor a = enc.pre_pool(imu), b = enc.pre_pool(Tensor({kImuChannels, L}, changed));
  bool moved = false;
  for (std::size_t ch = 0; ch < a.dim(0); ++ch) moved = moved || a[ch * L + 3] != b[ch * L + 3];
  EXPECT_TRUE(moved);
}

TEST(InertialEncoder, NormalizationIsAFixedAffineMap) {
  InertialEncoderConfig raw_cfg = small_inertial();
  raw_cfg.normalize_input = false;
  ParameterSet p1, p2;
  Rng r1(6), r2(6);
  const InertialEncoder normalized(small_inertial(), p1, r1);
  const InertialEncoder raw(raw_cfg, p2, r2);
  EXPECT_EQ(p1.total_count(), p2.total_count());

  const std::size_t L = raw_cfg.window;
  Rng data(7);
  const Tensor imu = random_tensor({kImuChannels, L}, data, 10.0);
  std::vector<double> scaled(imu.data().begin(), imu.data().end());
  for (std::size_t k = 0; k < 3 * L; ++k) scaled[3 * L + k] = scaled[3 * L + k] * (1.0 / kGravity);
  for (std::size_t k = 0; k < L; ++k) scaled[5 * L + k] += -1.0;
  const Tensor a = normalized.encode(imu), b = raw.encode(Tensor({kImuChannels, L}, scaled));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(InertialEncoder, LstmBaselineEncodesWindow) {
  InertialEncoderConfig cfg = small_inertial();
  cfg.use_wavenet = false;
  ParameterSet params;
  Rng rng(8);
  const InertialEncoder enc(cfg, params, rng);
  Rng data(9);
  const Tensor out = enc.encode(random_tensor({kImuChannels, cfg.window}, data));
  EXPECT_EQ(out.shape(), Shape{cfg.feature_dim});
  EXPECT_THROW(enc.pre_pool(random_tensor({kImuChannels, cfg.window}, data)), ContractError);
}

TEST(InertialEncoder, WrongWindowIsRejected) {
  ParameterSet params;
  Rng rng(10);
  const InertialEncoder enc(small_inertial(), params, rng);
  EXPECT_THROW(enc.encode(Tensor::zeros({kImuChannels, 7})), ContractError);
  EXPECT_THROW(enc.encode(Tensor::zeros({5, 11})), ContractError);
}

void zero_biases(ParameterSet& params) {
  for (auto& p : params.all()) {
    if (p.name.find("bias") != std::string::npos) {
      std::fill(p.value.mutable_data().begin(), p.value.mutable_data().end(), 0.0);
    }
  }
}

TEST(WaveNetLayer, MatchesManualComposition) {
  Rng rng(20);
  const std::size_t c = 3, L = 9, K = 2;
  WaveNetLayerWeights w;
  w.dilation = 4;
  w.filter_weight = random_tensor({c, c, K}, rng);
  w.filter_bias = random_tensor({c}, rng);
  w.gate_weight = random_tensor({c, c, K}, rng);
  w.gate_bias = random_tensor({c}, rng);
  w.skip_weight = random_tensor({c, c, 1}, rng);
  w.skip_bias = random_tensor({c}, rng);
  w.residual_weight = random_tensor({c, c, 1}, rng);
  w.residual_bias = random_tensor({c}, rng);
  const Tensor x = random_tensor({c, L}, rng, 2.0);
  const auto [residual, skip] = wavenet_layer(x, w);

  std::vector<double> z(c * L);
  for (std::size_t o = 0; o < c; ++o) {
    for (std::size_t t = 0; t < L; ++t) {
      double f = w.filter_bias[o], g = w.gate_bias[o];
      for (std::size_t i = 0; i < c; ++i) {
        const double past = t >= w.dilation ? x[i * L + t - w.dilation] : 0.0;
        f += w.filter_weight[(o * c + i) * K] * past + w.filter_weight[(o * c + i) * K + 1] * x[i * L + t];
        g += w.gate_weight[(o * c + i) * K] * past + w.gate_weight[(o * c + i) * K + 1] * x[i * L + t];
      }
      z[o * L + t] = std::tanh(f) / (1.0 + std::exp(-g));
    }
  }
  for (std::size_t o = 0; o < c; ++o) {
    for (std::size_t t = 0; t < L; ++t) {
      double sk = w.skip_bias[o], re = w.residual_bias[o];
      for (std::size_t i = 0; i < c; ++i) {
        sk += w.skip_weight[o * c + i] * z[i * L + t];
        re += w.residual_weight[o * c + i] * z[i * L + t];
      }
      EXPECT_NEAR(skip[o * L + t], sk, 1e-12);
      EXPECT_NEAR(residual[o * L + t], x[o * L + t] + re, 1e-12);
    }
  }
}

TEST(WaveNetLayer, ZeroWeightsPassInputThrough) {
  Rng rng(21);
  const std::size_t c = 4, L = 6;
  WaveNetLayerWeights w;
  w.dilation = 2;
  w.filter_weight = w.gate_weight = Tensor::zeros({c, c, 2});
  w.filter_bias = w.gate_bias = w.skip_bias = w.residual_bias = Tensor::zeros({c});
  w.skip_weight = w.residual_weight = Tensor::zeros({c, c, 1});
  const Tensor x = random_tensor({c, L}, rng);
  const auto [residual, skip] = wavenet_layer(x, w);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(residual[i], x[i]);
    EXPECT_EQ(skip[i], 0.0);
  }
  w.residual_weight = Tensor::zeros({c + 1, c, 1});
  w.residual_bias = Tensor::zeros({c + 1});
  EXPECT_THROW(wavenet_layer(x, w), DimensionError);
}

TEST(Encoders, ZeroInputWithZeroBiasesGivesZeroFeature) {
  InertialEncoderConfig icfg = small_inertial();
  icfg.normalize_input = false;  // the normalization offset would move a zero window
  ParameterSet params;
  Rng rng(22);
  const InertialEncoder inertial(icfg, params, rng);
  const VisualEncoder visual(VisualEncoderConfig{}, params, rng);
  zero_biases(params);
  const Tensor fi = inertial.encode(Tensor::zeros({kImuChannels, icfg.window}));
  const Tensor fv = visual.encode({Tensor::zeros({1, 32, 32}), Tensor::zeros({1, 32, 32})});
  for (double v : fi.data()) EXPECT_EQ(v, 0.0);
  for (double v : fv.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(fv.shape(), Shape{128});
}

TEST(VisualEncoder, FeatureWidthAndMotionSensitivity) {
  VisualEncoderConfig cfg;
  cfg.base_channels = 4;
  cfg.feature_dim = 12;
  ParameterSet params;
  Rng rng(11);
  const VisualEncoder enc(cfg, params, rng);

  PoseDelta still, moved;
  moved.t = Eigen::Vector3d(0.1, 0.05, 0.0);
  moved.psi = Eigen::Vector3d(0.0, 0.0, 0.05);
  const RenderSpec spec;
  const FramePair a = to_frame_pair(render_frame_pair(still, 3, spec), 32, 32);
  const FramePair b = to_frame_pair(render_frame_pair(moved, 3, spec), 32, 32);
  const Tensor fa = enc.encode(a), fb = enc.encode(b);
  EXPECT_EQ(fa.shape(), Shape{12});
  double diff = 0.0;
  for (std::size_t i = 0; i < 12; ++i) diff += std::abs(fa[i] - fb[i]);
  EXPECT_GT(diff, 1e-6);
}

TEST(VisualEncoder, RejectsSmallOrMismatchedImages) {
  VisualEncoderConfig cfg;
  cfg.height = 8;
  ParameterSet params;
  Rng rng(12);
  EXPECT_THROW(VisualEncoder(cfg, params, rng), ConfigError);

  VisualEncoderConfig ok;
  ParameterSet p2;
  const VisualEncoder enc(ok, p2, rng);
  FramePair pair{Tensor::zeros({1, 16, 16}), Tensor::zeros({1, 16, 16})};
  EXPECT_THROW(enc.encode(pair), ConfigError);
  pair.target = Tensor::zeros({1, 32, 32});
  EXPECT_THROW(enc.encode(pair), DimensionError);
}

}  // namespace
