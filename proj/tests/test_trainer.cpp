#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "emavio/error.hpp"
#include "emavio/trainer.hpp"
#include "support.hpp"

namespace {

using namespace emavio;
using emavio::test::read_bytes;
using emavio::test::TempDir;
using emavio::test::tiny_config;

const Dataset& tiny_dataset() {
  static const Dataset ds = synthesize_dataset(tiny_config().synth);
  return ds;
}

TEST(Trainer, LogColumnsFollowMultistateFlag) {
  EXPECT_EQ(loss_log_header(true), "step,frame_loss,seq_loss,total,grad_norm,wall_ms");
  EXPECT_EQ(loss_log_header(false), "step,frame_loss,total,grad_norm,wall_ms");
  LogRow row;
  row.step = 3;
  row.total = 0.5;
  const std::string line = format_loss_row(row, false);
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4);
  EXPECT_EQ(line.rfind("3,", 0), 0u);

  TempDir dir("train_nomc");
  Config c = tiny_config();
  c.loss.use_multistate = false;
  c.optim.steps = 2;
  const auto rows = run_training(c, tiny_dataset(), dir.path());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].seq_loss, 0.0);
  const std::string log = read_bytes(dir / "loss.csv");
  EXPECT_EQ(log.rfind(loss_log_header(false) + "\n", 0), 0u);
  EXPECT_EQ(log.find("seq_loss"), std::string::npos);
}

TEST(Trainer, RunsAreReproducibleAndResumeIsExact) {
  TempDir a("train_a"), b("train_b"), r("train_resume");
  const Config c = tiny_config();
  run_training(c, tiny_dataset(), a.path());
  run_training(c, tiny_dataset(), b.path());
  EXPECT_EQ(read_bytes(a / "loss.csv"), read_bytes(b / "loss.csv"));
  EXPECT_EQ(read_bytes(a / "checkpoint.bin"), read_bytes(b / "checkpoint.bin"));

  Config half = c;
  half.optim.steps = 2;
  run_training(half, tiny_dataset(), r.path());
  run_training(c, tiny_dataset(), r.path(), true);
  EXPECT_EQ(read_bytes(a / "loss.csv"), read_bytes(r / "loss.csv"));
  EXPECT_EQ(read_bytes(a / "checkpoint.bin"), read_bytes(r / "checkpoint.bin"));
}

TEST(Trainer, EpochsVisitEveryWindowOnce) {
  Config c = tiny_config();
  c.optim.batch_size = 3;
  const Trainer t(c, tiny_dataset());
  const std::size_t n = t.window_count();
  ASSERT_GT(n, 3u);
  std::vector<int> seen(n, 0);
  for (std::size_t position = 0; position < n; ++position) ++seen[t.batch_indices(position / 3)[position % 3]];
  EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), static_cast<long>(n));
  EXPECT_NE(t.batch_indices(0), t.batch_indices(n));  // next epoch, new permutation
}

TEST(Trainer, MeanLossMatchesProbeOnSameWindows) {
  const Trainer t(tiny_config(), tiny_dataset());
  const LogRow probe = t.probe(5);
  const LogRow mean = t.mean_loss(t.batch_indices(5));
  EXPECT_EQ(probe.total, mean.total);
  EXPECT_EQ(probe.frame_loss, mean.frame_loss);
  EXPECT_THROW(t.mean_loss({}), ContractError);
  EXPECT_THROW(t.mean_loss({t.window_count()}), ContractError);
}

TEST(Trainer, SinglePrecisionStorageRoundsParameters) {
  Config c = tiny_config();
  c.train.precision = Precision::kF32;
  Trainer t(c, tiny_dataset());
  t.step();
  for (const auto& p : t.model().params().all()) {
    for (double v : p.value.data()) ASSERT_EQ(v, static_cast<double>(static_cast<float>(v))) << p.name;
  }
}

TEST(Trainer, NonFiniteGradientLeavesParametersUntouched) {
  Trainer t(tiny_config(), tiny_dataset());
  auto params = t.model().params().all();
  params.back().value.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> before;
  for (const auto& p : params) before.emplace_back(p.value.data().begin(), p.value.data().end());
  EXPECT_THROW(t.step(), TrainingDivergence);
  for (std::size_t i = 0; i + 1 < params.size(); ++i) {
    EXPECT_TRUE(std::equal(before[i].begin(), before[i].end(), params[i].value.data().begin())) << params[i].name;
  }
}

TEST(Trainer, DatasetDimensionsMustMatchModel) {
  Config c = tiny_config();
  c.model.visual.height = 32;
  c.model.visual.width = 32;
  EXPECT_THROW(Trainer(c, tiny_dataset()), ConfigError);
  Config d = tiny_config();
  d.model.inertial.window = 21;
  EXPECT_THROW(Trainer(d, tiny_dataset()), ConfigError);
}

TEST(Trainer, EveryFusionModeTrainsWithoutDivergence) {
  for (const auto mode : {FusionMode::kLstm, FusionMode::kSelfAttention, FusionMode::kEma}) {
    Config c = tiny_config();
    c.model.fusion.mode = mode;
    Trainer t(c, tiny_dataset());
    for (int i = 0; i < 50; ++i) ASSERT_TRUE(std::isfinite(t.step().total)) << to_string(mode) << " step " << i;
  }
}

TEST(Inference, OutputsOnePosePerInterval) {
  const Config c = tiny_config();
  const EmaVioModel model(c.model, 1);
  const SequenceRecord& rec = *tiny_dataset().split(Split::kTest).front();
  const SequenceSample s = make_sample(rec, 0, 4);
  EXPECT_EQ(model.forward(s).size(), 3u);
  const SequencePrediction p = predict_sequence(model, rec);
  EXPECT_EQ(p.relatives.size(), rec.frames - 1);
  EXPECT_EQ(p.poses.size(), rec.frames);
  EXPECT_EQ(p.poses.front().matrix(), rec.poses.front().matrix());
}

TEST(Inference, ForwardIsDeterministic) {
  const Config c = tiny_config();
  const EmaVioModel model(c.model, 2);
  const SequenceSample s = make_sample(*tiny_dataset().split(Split::kTest).front(), 3, 3);
  const auto a = model.forward(s), b = model.forward(s);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE(std::equal(a[k].data().begin(), a[k].data().end(), b[k].data().begin()));
  }
}

TEST(Inference, GroundTruthAsPredictionScoresZero) {
  const Config c = tiny_config();
  const SequenceRecord& rec = *tiny_dataset().split(Split::kTest).front();
  SequencePrediction p;
  p.sequence = rec.id;
  p.poses = rec.poses;
  p.gt_poses = rec.poses;
  p.relatives = rec.relatives;
  const EvalReport r = evaluate_predictions({p}, c);
  EXPECT_EQ(r.drift.t_rel_avg, 0.0);
  EXPECT_EQ(r.drift.r_rel_avg, 0.0);
  EXPECT_EQ(r.hpe_m, 0.0);
  EXPECT_LT(r.composition_hpe_m, 1e-12);
  EXPECT_EQ(r.config, c.echo());
}

TEST(Inference, ZeroWeightsPredictNoMotion) {
  const Config c = tiny_config();
  EmaVioModel model(c.model, 1);
  for (auto& p : model.params().all()) std::fill(p.value.mutable_data().begin(), p.value.mutable_data().end(), 0.0);
  const SequenceRecord& rec = *tiny_dataset().split(Split::kTest).front();
  const SequencePrediction p = predict_sequence(model, rec);
  for (const auto& r : p.relatives) EXPECT_EQ(r, PoseDelta{});
  for (const auto& pose : p.poses) EXPECT_LT((pose.matrix() - rec.poses.front().matrix()).norm(), 1e-12);
}

TEST(Inference, EvaluationCoversTestSplit) {
  const Config c = tiny_config();
  const EmaVioModel model(c.model, 1);
  const EvalReport report = evaluate_model(model, tiny_dataset(), c);
  EXPECT_EQ(report.frame_count, tiny_dataset().split(Split::kTest).front()->frames);
  EXPECT_FALSE(report.drift.per_length.empty());
  EXPECT_GT(report.hpe_m, 0.0);
  EXPECT_EQ(report.config.at("model.fusion_mode"), "ema");

  Config wrong = c;
  wrong.model.visual.height = 32;
  wrong.model.visual.width = 32;
  const EmaVioModel mismatched(wrong.model, 1);
  EXPECT_THROW(evaluate_model(mismatched, tiny_dataset(), wrong), ConfigError);
}

}  // namespace
