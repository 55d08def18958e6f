#include <gtest/gtest.h>

#include <cmath>

#include "emavio/error.hpp"
#include "emavio/geometry.hpp"
#include "emavio/gradcheck.hpp"
#include "emavio/gradcheck_suite.hpp"
#include "emavio/ops.hpp"
#include "emavio/parameter.hpp"
#include "support.hpp"

namespace {

using namespace emavio;
using emavio::test::random_tensor;

TEST(Tensor, ElementwiseActivationsMatchLibm) {
  Rng rng(1);
  const Tensor x = random_tensor({17}, rng, 4.0);
  const Tensor t = ops::tanh(x), s = ops::sigmoid(x), r = ops::relu(x);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_NEAR(t[i], std::tanh(x[i]), 1e-15);
    EXPECT_NEAR(s[i], 1.0 / (1.0 + std::exp(-x[i])), 1e-15);
    EXPECT_EQ(r[i], std::max(0.0, x[i]));
  }
}

TEST(Tensor, SoftmaxRowsSumToOneAndIgnoreShifts) {
  Rng rng(2);
  const Tensor x = random_tensor({3, 5}, rng, 10.0);
  std::vector<double> shifted(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < 5; ++i) shifted[i] += 700.0;  // would overflow exp() unshifted
  const Tensor a = ops::softmax(x, 1), b = ops::softmax(Tensor({3, 5}, shifted), 1);
  for (std::size_t r = 0; r < 3; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      sum += a[r * 5 + c];
      EXPECT_NEAR(a[r * 5 + c], b[r * 5 + c], 1e-12);
    }
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
}

TEST(Tensor, ShapeMismatchNamesBothShapes) {
  const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({3, 2});
  try {
    ops::add(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("2x3"), std::string::npos) << what;
    EXPECT_NE(what.find("3x2"), std::string::npos) << what;
  }
  EXPECT_THROW(ops::matmul(a, a), DimensionError);
}

TEST(Tensor, SecondBackwardWithoutZeroGradThrows) {
  Tensor w = Tensor::vector({1.0, 2.0}, true);
  const Tensor loss = ops::sum(ops::square(w));
  loss.backward();
  EXPECT_DOUBLE_EQ(w.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(w.grad()[1], 4.0);
  const Tensor again = ops::sum(ops::square(w));
  EXPECT_THROW(again.backward(), GradientStateError);
  w.zero_grad();
  again.backward();
  EXPECT_DOUBLE_EQ(w.grad()[1], 4.0);
}

TEST(Tensor, NoGradGuardRecordsNothing) {
  const Tensor w = Tensor::vector({1.0, 2.0}, true);
  {
    NoGradGuard guard;
    const Tensor y = ops::scale(w, 3.0);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_FALSE(grad_mode_enabled());
  }
  EXPECT_TRUE(grad_mode_enabled());
  EXPECT_TRUE(ops::scale(w, 3.0).requires_grad());
}

TEST(Tensor, RotationOpsMatchEigenPath) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector3d e(rng.uniform(-3, 3), rng.uniform(-1.4, 1.4), rng.uniform(-3, 3));
    const Tensor r = ops::euler_to_rotation(Tensor::vector({e[0], e[1], e[2]}));
    const Eigen::Matrix3d ref = euler_to_rotation(e);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(r[i * 3 + j], ref(i, j), 1e-15);
    }
    const Tensor back = ops::rotation_to_euler(r);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(back[i], e[i], 1e-12);
  }
}

TEST(GradCheck, PassesOnCorrectOps) {
  Rng rng(4);
  const Tensor a = random_tensor({3, 4}, rng, 1.0, true), b = random_tensor({4, 2}, rng, 1.0, true);
  const auto r = finite_diff_check([&] { return ops::sum(ops::tanh(ops::matmul(a, b))); }, {a, b});
  EXPECT_LT(r.max_relative_error, 1e-8);
  EXPECT_EQ(r.coords_checked, 20u);
  EXPECT_FALSE(a.has_grad());
}

// A deliberately wrong backward rule must be caught.
TEST(GradCheck, DetectsCorruptedBackward) {
  Rng rng(5);
  const Tensor x = random_tensor({6}, rng, 1.0, true);
  const auto broken_square = [](const Tensor& in) {
    std::vector<double> out(in.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * in[i];
    return Tensor::make(in.shape(), std::move(out), "broken_square", {in}, [](detail::Node& node) {
      auto& parent = *node.parents[0];
      auto& g = parent.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.02 * parent.data[i] * node.grad[i];
    });
  };
  const auto r = finite_diff_check([&] { return ops::sum(broken_square(x)); }, {x});
  EXPECT_GT(r.max_relative_error, 1e-3);
}

TEST(GradCheck, SuiteNamesTheFailingBlock) {
  Rng rng(9);
  const Tensor x = random_tensor({4}, rng, 1.0, true);
  std::vector<GradBlock> blocks;
  blocks.push_back({"healthy", 1e-6, [x] { return finite_diff_check([x] { return ops::sum(ops::tanh(x)); }, {x}); }});
  blocks.push_back({"corrupted", 1e-6, [x] {
                      const auto doubled = [](const Tensor& in) {
                        std::vector<double> out(in.data().begin(), in.data().end());
                        return Tensor::make(in.shape(), std::move(out), "bad_identity", {in}, [](detail::Node& node) {
                          auto& g = node.parents[0]->ensure_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * node.grad[i];
                        });
                      };
                      return finite_diff_check([&] { return ops::sum(doubled(x)); }, {x});
                    }});
  const auto outcomes = run_gradcheck_suite(blocks);
  ASSERT_EQ(outcomes.size(), 2u);
  EXPECT_TRUE(outcomes[0].passed);
  EXPECT_FALSE(outcomes[1].passed);
  EXPECT_EQ(outcomes[1].name, "corrupted");
  EXPECT_EQ(kEndToEndTolerance, 1e-4);
}

TEST(GradCheck, RejectsNondeterministicGraph) {
  const Tensor x = Tensor::vector({1.0}, true);
  double drift = 0.0;
  EXPECT_THROW(finite_diff_check(
                   [&] {
                     drift += 1.0;
                     return ops::sum(ops::scale(x, drift));
                   },
                   {x}),
               ContractError);
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  ParameterSet params;
  Rng rng(6);
  const Tensor w = params.add_uniform("w", {5}, 5, rng);
  std::vector<double> before(w.data().begin(), w.data().end());
  const Tensor target = Tensor::vector({0.3, -0.2, 0.1, 0.0, -0.4});
  ops::sum(ops::square(ops::sub(w, target))).backward();
  std::vector<double> g(w.grad().begin(), w.grad().end());
  AdamConfig cfg;
  cfg.lr = 0.01;
  adam_step(params.all(), cfg);
  EXPECT_FALSE(w.has_grad());
  for (std::size_t i = 0; i < 5; ++i) {
    // m_hat = g, v_hat = g^2 after one bias-corrected step.
    const double expected = before[i] - cfg.lr * g[i] / (std::abs(g[i]) + cfg.eps);
    EXPECT_NEAR(w[i], expected, 1e-15);
  }
  EXPECT_EQ(params.all()[0].step_count, 1u);
}

TEST(Adam, MissingGradientNamesTheParameter) {
  ParameterSet params;
  Rng rng(7);
  params.add_uniform("encoder.weight", {2}, 2, rng);
  try {
    adam_step(params.all(), AdamConfig{});
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder.weight"), std::string::npos);
  }
}

TEST(Parameters, UniformInitRespectsFanIn) {
  ParameterSet params;
  Rng rng(8);
  const Tensor w = params.add_uniform("w", {64, 16}, 16, rng);
  for (double v : w.data()) EXPECT_LE(std::abs(v), 0.25);
  EXPECT_EQ(params.total_count(), 1024u);
  EXPECT_THROW(params.add_uniform("w", {1}, 1, rng), ConfigError);
}

}  // namespace
