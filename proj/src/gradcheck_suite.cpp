#include "emavio/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "emavio/encoders.hpp"
#include "emavio/fusion.hpp"
#include "emavio/losses.hpp"
#include "emavio/model.hpp"
#include "emavio/ops.hpp"
#include "emavio/rng.hpp"

namespace emavio {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Random linear functional of y, so every output element carries gradient.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed, 0x70726f6aULL);
  return ops::sum(ops::mul(y, random_tensor(y.shape(), rng, 1.0, false)));
}

GradBlock block(std::string name, double tol, std::function<GradCheckResult()> run) {
  return {std::move(name), tol, std::move(run)};
}

PoseDelta random_pose(Rng& rng, double t_scale, double r_scale) {
  PoseDelta p;
  for (int i = 0; i < 3; ++i) p.t[i] = t_scale * rng.uniform(-1.0, 1.0);
  for (int i = 0; i < 3; ++i) p.psi[i] = r_scale * rng.uniform(-1.0, 1.0);
  return p;
}

SequenceSample random_sample(const ModelConfig& m, std::size_t frames, Rng& rng) {
  SequenceSample s;
  std::vector<SE3Transform> chain;
  for (std::size_t i = 0; i + 1 < frames; ++i) {
    FramePair pair;
    std::vector<double> a(m.visual.channels * m.visual.height * m.visual.width), b(a.size());
    for (auto& x : a) x = rng.uniform();
    for (auto& x : b) x = rng.uniform();
    pair.reference = Tensor({m.visual.channels, m.visual.height, m.visual.width}, std::move(a));
    pair.target = Tensor({m.visual.channels, m.visual.height, m.visual.width}, std::move(b));
    s.frames.push_back(pair);
    std::vector<double> imu(kImuChannels * m.inertial.window);
    for (auto& x : imu) x = rng.normal();
    s.imu.emplace_back(Shape{kImuChannels, m.inertial.window}, std::move(imu));
    s.gt_rel.push_back(random_pose(rng, 0.2, 0.05));
    chain.push_back(pose_to_transform(s.gt_rel.back()));
  }
  s.gt_seq = transform_to_pose(compose_chain(chain));
  return s;
}

}  // namespace

ModelConfig gradcheck_model_config(const ModelConfig& config) {
  ModelConfig m = config;
  m.visual.channels = 1;
  m.visual.height = VisualEncoder::kMinImageSize;
  m.visual.width = VisualEncoder::kMinImageSize;
  m.visual.base_channels = 2;
  m.visual.feature_dim = 8;
  m.inertial.channels = 4;
  m.inertial.layers = std::min<std::size_t>(config.inertial.layers, 3);
  m.inertial.feature_dim = 8;
  m.inertial.lstm_hidden = 4;
  m.fusion.tokens = 2;
  m.fusion.token_dim = 8;
  m.fusion.memory_slots = 4;
  m.fusion.lstm_hidden = 6;
  m.regressor_hidden = 8;
  return m;
}

std::vector<GradBlock> default_gradcheck_blocks(const Config& config) {
  std::vector<GradBlock> blocks;
  GradCheckOptions all;

  blocks.push_back(block("linear", kLinearTolerance, [all] {
    Rng rng(11);
    const Tensor x = random_tensor({3, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
    return finite_diff_check([=] { return project(ops::linear(x, w, b), 1); }, {x, w, b}, all);
  }));
  blocks.push_back(block("matmul", kLinearTolerance, [all] {
    Rng rng(12);
    const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng), c = random_tensor({5, 4}, rng);
    return finite_diff_check([=] { return ops::add(project(ops::matmul(a, b), 2), project(ops::matmul_nt(a, c), 3)); },
                             {a, b, c}, all);
  }));
  blocks.push_back(block("conv1d_causal", kBlockTolerance, [all] {
    Rng rng(13);
    const Tensor x = random_tensor({3, 12}, rng), w = random_tensor({4, 3, 2}, rng), b = random_tensor({4}, rng);
    return finite_diff_check([=] { return project(ops::conv1d_causal(x, w, b, 2), 4); }, {x, w, b}, all);
  }));
  blocks.push_back(block("gated_activation", kBlockTolerance, [all] {
    Rng rng(14);
    const Tensor x = random_tensor({3, 10}, rng);
    const Tensor wf = random_tensor({3, 3, 2}, rng, 0.5), bf = random_tensor({3}, rng, 0.5);
    const Tensor wg = random_tensor({3, 3, 2}, rng, 0.5), bg = random_tensor({3}, rng, 0.5);
    return finite_diff_check([=] { return project(ops::gated_activation(x, wf, bf, wg, bg, 4), 5); },
                             {x, wf, bf, wg, bg}, all);
  }));
  blocks.push_back(block("wavenet_layer", kBlockTolerance, [all] {
    Rng rng(15);
    WaveNetLayerWeights w;
    w.dilation = 2;
    w.filter_weight = random_tensor({4, 4, 2}, rng, 0.5);
    w.filter_bias = random_tensor({4}, rng, 0.5);
    w.gate_weight = random_tensor({4, 4, 2}, rng, 0.5);
    w.gate_bias = random_tensor({4}, rng, 0.5);
    w.skip_weight = random_tensor({4, 4, 1}, rng, 0.5);
    w.skip_bias = random_tensor({4}, rng, 0.5);
    w.residual_weight = random_tensor({4, 4, 1}, rng, 0.5);
    w.residual_bias = random_tensor({4}, rng, 0.5);
    const Tensor x = random_tensor({4, 9}, rng);
    return finite_diff_check(
        [=] {
          auto [res, skip] = wavenet_layer(x, w);
          return ops::add(project(res, 6), project(skip, 7));
        },
        {x, w.filter_weight, w.filter_bias, w.gate_weight, w.gate_bias, w.skip_weight, w.skip_bias,
         w.residual_weight, w.residual_bias},
        all);
  }));
  blocks.push_back(block("conv2d", kBlockTolerance, [all] {
    Rng rng(16);
    const Tensor x = random_tensor({2, 7, 7}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
    return finite_diff_check([=] { return project(ops::conv2d(x, w, b, 2, 1), 8); }, {x, w, b}, all);
  }));
  blocks.push_back(block("lstm_cell", kBlockTolerance, [all] {
    Rng rng(17);
    ops::LstmWeights w{random_tensor({16, 5}, rng, 0.5), random_tensor({16, 4}, rng, 0.5), random_tensor({16}, rng, 0.5)};
    const Tensor x = random_tensor({5}, rng), h = random_tensor({4}, rng), c = random_tensor({4}, rng);
    return finite_diff_check(
        [=] {
          auto [h1, c1] = ops::lstm_cell(x, h, c, w);
          return ops::add(project(h1, 9), project(c1, 10));
        },
        {x, h, c, w.input, w.hidden, w.bias}, all);
  }));
  blocks.push_back(block("softmax_normalize", kBlockTolerance, [all] {
    Rng rng(18);
    const Tensor x = random_tensor({4, 5}, rng, 2.0);
    return finite_diff_check([=] { return project(ops::normalize_sum(ops::softmax(x, 1), 0), 11); }, {x}, all);
  }));

  const FusionConfig fusion = config.model.fusion;
  auto attention_weights = [](Rng& rng, std::size_t d, std::size_t m) {
    AttentionWeights w;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    w.query = random_tensor({d, d}, rng, s);
    w.key = random_tensor({d, d}, rng, s);
    w.value = random_tensor({d, d}, rng, s);
    w.output = random_tensor({d, d}, rng, s);
    w.query_memory1 = random_tensor({m, d}, rng, s);
    w.query_memory2 = random_tensor({m, d}, rng);
    w.key_memory1 = random_tensor({m, d}, rng, s);
    w.key_memory2 = random_tensor({m, d}, rng);
    return w;
  };
  const AttentionOptions options{fusion.scale_logits, fusion.memory_norm, fusion.memory_target};
  blocks.push_back(block("self_attention", kBlockTolerance, [all, attention_weights, options] {
    Rng rng(19);
    const AttentionWeights w = attention_weights(rng, 6, 5);
    const Tensor f = random_tensor({4, 6}, rng);
    return finite_diff_check([=] { return project(self_attention(f, w, options), 12); },
                             {f, w.query, w.key, w.value, w.output}, all);
  }));
  // Two stacked normalisations leave some coordinates with gradients near
  // 1e-6; at the default step their differences are round-off dominated.
  GradCheckOptions coarse = all;
  coarse.epsilon = 1e-4;
  blocks.push_back(block("ema_attention", kBlockTolerance, [coarse, attention_weights, options] {
    Rng rng(20);
    const AttentionWeights w = attention_weights(rng, 6, 5);
    const Tensor f = random_tensor({4, 6}, rng);
    return finite_diff_check([=] { return project(ema_fuse(f, w, options), 13); },
                             {f, w.query, w.key, w.value, w.output, w.query_memory1, w.query_memory2, w.key_memory1,
                              w.key_memory2},
                             coarse);
  }));
  blocks.push_back(block("euler_rotation", kBlockTolerance, [all] {
    Rng rng(21);
    const Tensor a = random_tensor({3}, rng, 0.6), b = random_tensor({3}, rng, 0.6);
    return finite_diff_check(
        [=] {
          const Tensor r = ops::matmul(ops::euler_to_rotation(a), ops::euler_to_rotation(b));
          return project(ops::rotation_to_euler(r), 14);
        },
        {a, b}, all);
  }));

  const double lambda1 = config.loss.lambda1, lambda2 = config.loss.lambda2;
  blocks.push_back(block("frame_loss", kEndToEndTolerance, [all, lambda1] {
    Rng rng(22);
    std::vector<Tensor> pred;
    std::vector<PoseDelta> gt;
    for (int i = 0; i < 4; ++i) {
      pred.push_back(random_tensor({6}, rng, 0.3));
      gt.push_back(random_pose(rng, 0.3, 0.1));
    }
    return finite_diff_check([=] { return frame_loss(pred, gt, lambda1); }, pred, all);
  }));
  blocks.push_back(block("sequence_loss", kEndToEndTolerance, [all, lambda2] {
    Rng rng(23);
    std::vector<Tensor> pred;
    for (int i = 0; i < 3; ++i) pred.push_back(random_tensor({6}, rng, 0.3));
    const PoseDelta gt = random_pose(rng, 0.5, 0.2);
    return finite_diff_check([=] { return sequence_loss(pred, gt, lambda2); }, pred, all);
  }));

  const ModelConfig toy = gradcheck_model_config(config.model);
  const LossConfig loss = config.loss;
  blocks.push_back(block("end_to_end", kEndToEndTolerance, [toy, loss] {
    auto model = std::make_shared<EmaVioModel>(toy, 24);
    Rng rng(25);
    const SequenceSample sample = random_sample(toy, 3, rng);
    GradCheckOptions opts;
    opts.epsilon = 1e-4;
    opts.max_coords_per_tensor = 6;
    return finite_diff_check(
        [model, sample, loss] {
          const auto pred = model->forward(sample);
          const Tensor frame = frame_loss(pred, sample.gt_rel, loss.lambda1);
          const Tensor seq = loss.use_multistate ? sequence_loss(pred, sample.gt_seq, loss.lambda2) : Tensor::scalar(0.0);
          return total_loss(frame, seq);
        },
        model->params().tensors(), opts);
  }));
  return blocks;
}

std::vector<GradBlockOutcome> run_gradcheck_suite(const std::vector<GradBlock>& blocks) {
  std::vector<GradBlockOutcome> out;
  for (const auto& b : blocks) {
    GradBlockOutcome o;
    o.name = b.name;
    o.tolerance = b.tolerance;
    o.result = b.run();
    o.passed = o.result.max_relative_error < b.tolerance;
    out.push_back(o);
  }
  return out;
}

}  // namespace emavio
