#pragma once

// Training loop, evaluation and inference over a dataset.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "emavio/config.hpp"
#include "emavio/dataset.hpp"
#include "emavio/evaluation.hpp"
#include "emavio/model.hpp"

namespace emavio {

struct LogRow {
  std::size_t step = 0;
  double frame_loss = 0.0;
  double seq_loss = 0.0;  // 0 and not logged without the multi-state term
  double total = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;  // 0 unless train.log_wall_time
};

std::string loss_log_header(bool multistate);
std::string format_loss_row(const LogRow& row, bool multistate);

class Trainer {
 public:
  // Throws ConfigError when the dataset's image or IMU dimensions differ
  // from the model's, or the training split has no n-frame window.
  Trainer(const Config& config, const Dataset& dataset);

  // One ADAM step on the next minibatch. Gradients are averaged over the
  // batch. Throws TrainingDivergence (parameters untouched) on a non-finite
  // loss or gradient.
  LogRow step();

  // Batch loss without updating anything.
  LogRow probe(std::size_t step_index) const;

  // Mean loss over the given training windows (indices below
  // window_count()), without updating anything.
  LogRow mean_loss(const std::vector<std::size_t>& windows) const;
  std::size_t window_count() const { return windows_.size(); }

  std::size_t current_step() const { return step_; }
  EmaVioModel& model() { return model_; }
  const EmaVioModel& model() const { return model_; }
  const Config& config() const { return config_; }

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

  // Window indices of the minibatch used at `step_index`. Epochs walk a
  // permutation seeded by (train.seed, epoch).
  std::vector<std::size_t> batch_indices(std::size_t step_index) const;

 private:
  struct BatchLoss {
    Tensor total;
    double frame = 0.0, seq = 0.0;
  };
  BatchLoss batch_loss(std::size_t step_index) const;
  BatchLoss window_loss(const std::vector<std::size_t>& indices, long step_tag) const;

  Config config_;
  const Dataset& dataset_;
  EmaVioModel model_;
  std::vector<std::pair<std::size_t, std::size_t>> windows_;
  std::size_t step_ = 0;
};

// Trains to optim.steps, writing <out>/loss.csv and <out>/checkpoint.bin
// (every optim.checkpoint_every steps and at the end). With `resume` the run
// continues from <out>/checkpoint.bin and appends to the log. On divergence
// the last good parameters are checkpointed and the error is rethrown.
std::vector<LogRow> run_training(const Config& config, const Dataset& dataset, const std::filesystem::path& out,
                                 bool resume = false, std::ostream* progress = nullptr);

struct SequencePrediction {
  std::uint32_t sequence = 0;
  std::vector<PoseDelta> relatives;
  std::vector<SE3Transform> poses;     // accumulated from the first gt pose
  std::vector<SE3Transform> gt_poses;
};

SequencePrediction predict_sequence(const EmaVioModel& model, const SequenceRecord& record);

// Drift and HPE pooled over the test split.
EvalReport evaluate_model(const EmaVioModel& model, const Dataset& dataset, const Config& config);
// Same metrics for externally supplied relative poses, one list per test
// sequence.
EvalReport evaluate_predictions(const std::vector<SequencePrediction>& predictions, const Config& config);

}  // namespace emavio
