#include "emavio/trainer.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <ostream>

#include "emavio/checkpoint.hpp"
#include "emavio/error.hpp"
#include "emavio/losses.hpp"
#include "emavio/ops.hpp"
#include "emavio/rng.hpp"
#include "text_format.hpp"

namespace emavio {

namespace {

void round_to_float(ParameterSet& params) {
  for (auto& p : params.all())
    for (double& v : p.value.mutable_data()) v = static_cast<double>(static_cast<float>(v));
}

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, 0x62617463680000ULL + epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

}  // namespace

std::string loss_log_header(bool multistate) {
  return multistate ? "step,frame_loss,seq_loss,total,grad_norm,wall_ms" : "step,frame_loss,total,grad_norm,wall_ms";
}

std::string format_loss_row(const LogRow& row, bool multistate) {
  using detail::format_double;
  std::string line = std::to_string(row.step) + ',' + format_double(row.frame_loss) + ',';
  if (multistate) line += format_double(row.seq_loss) + ',';
  line += format_double(row.total) + ',' + format_double(row.grad_norm) + ',' + format_double(row.wall_ms);
  return line;
}

Trainer::Trainer(const Config& config, const Dataset& dataset)
    : config_(config), dataset_(dataset), model_(config.model, config.train.seed) {
  config_.validate();
  const auto& m = config_.model;
  for (const auto& r : dataset.sequences) {
    if (m.visual.channels != 1 || r.height != m.visual.height || r.width != m.visual.width) {
      throw ConfigError("train: visual stage expects " + std::to_string(m.visual.channels) + "x" +
                        std::to_string(m.visual.height) + "x" + std::to_string(m.visual.width) +
                        " images, dataset has 1x" + std::to_string(r.height) + "x" + std::to_string(r.width));
    }
    if (r.imu_length != m.inertial.window) {
      throw ConfigError("train: inertial stage expects IMU windows of " + std::to_string(m.inertial.window) +
                        " samples, dataset has " + std::to_string(r.imu_length));
    }
  }
  windows_ = sample_windows(dataset, Split::kTrain, config_.loss.sequence_length, config_.train.window_stride);
  if (windows_.empty()) {
    throw ConfigError("train: no training sequence has " + std::to_string(config_.loss.sequence_length) + " frames");
  }
  if (config_.train.precision == Precision::kF32) round_to_float(model_.params());
}

std::vector<std::size_t> Trainer::batch_indices(std::size_t step_index) const {
  const std::size_t n = windows_.size();
  const std::size_t batch = config_.optim.batch_size;
  std::vector<std::size_t> out;
  out.reserve(batch);
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm;
  for (std::size_t j = 0; j < batch; ++j) {
    const std::size_t position = step_index * batch + j;
    const std::size_t epoch = position / n;
    if (epoch != cached_epoch) {
      perm = epoch_permutation(config_.train.seed, epoch, n);
      cached_epoch = epoch;
    }
    out.push_back(perm[position % n]);
  }
  return out;
}

Trainer::BatchLoss Trainer::batch_loss(std::size_t step_index) const {
  return window_loss(batch_indices(step_index), static_cast<long>(step_index));
}

Trainer::BatchLoss Trainer::window_loss(const std::vector<std::size_t>& indices, long step_tag) const {
  const double inv = 1.0 / static_cast<double>(indices.size());
  BatchLoss out;
  for (std::size_t idx : indices) {
    const auto [seq, start] = windows_[idx];
    const SequenceSample sample = make_sample(dataset_.sequences[seq], start, config_.loss.sequence_length);
    const auto pred = model_.forward(sample);
    const Tensor frame = frame_loss(pred, sample.gt_rel, config_.loss.lambda1);
    const Tensor seq_term = config_.loss.use_multistate ? sequence_loss(pred, sample.gt_seq, config_.loss.lambda2)
                                                        : Tensor::scalar(0.0);
    const Tensor total = ops::scale(total_loss(frame, seq_term, step_tag), inv);
    out.total = out.total.defined() ? ops::add(out.total, total) : total;
    out.frame += frame.item() * inv;
    out.seq += seq_term.item() * inv;
  }
  return out;
}

LogRow Trainer::probe(std::size_t step_index) const {
  NoGradGuard no_grad;
  const BatchLoss loss = batch_loss(step_index);
  LogRow row;
  row.step = step_index;
  row.frame_loss = loss.frame;
  row.seq_loss = loss.seq;
  row.total = loss.total.item();
  return row;
}

LogRow Trainer::mean_loss(const std::vector<std::size_t>& windows) const {
  if (windows.empty()) throw ContractError("mean_loss: no windows");
  for (std::size_t w : windows) {
    if (w >= windows_.size()) throw ContractError("mean_loss: window " + std::to_string(w) + " out of range");
  }
  NoGradGuard no_grad;
  const BatchLoss loss = window_loss(windows, static_cast<long>(step_));
  LogRow row;
  row.step = step_;
  row.frame_loss = loss.frame;
  row.seq_loss = loss.seq;
  row.total = loss.total.item();
  return row;
}

LogRow Trainer::step() {
  const auto started = std::chrono::steady_clock::now();
  const BatchLoss loss = batch_loss(step_);
  auto& params = model_.params();
  params.zero_grad();
  loss.total.backward();
  const double norm = gradient_norm(params.all());
  if (!std::isfinite(norm)) {
    params.zero_grad();
    throw TrainingDivergence("non-finite gradient norm at step " + std::to_string(step_), static_cast<long>(step_));
  }
  adam_step(params.all(), config_.optim.adam);
  if (config_.train.precision == Precision::kF32) round_to_float(params);

  LogRow row;
  row.step = step_;
  row.frame_loss = loss.frame;
  row.seq_loss = loss.seq;
  row.total = loss.total.item();
  row.grad_norm = norm;
  if (config_.train.log_wall_time) {
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  }
  ++step_;
  return row;
}

void Trainer::save(const std::filesystem::path& path) const {
  save_checkpoint(path, config_, model_.params(), step_);
}

void Trainer::load(const std::filesystem::path& path) {
  step_ = load_checkpoint(path, config_, model_.params());
}

std::vector<LogRow> run_training(const Config& config, const Dataset& dataset, const std::filesystem::path& out,
                                 bool resume, std::ostream* progress) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  const auto ckpt = out / "checkpoint.bin";
  const auto log_path = out / "loss.csv";
  const bool multistate = config.loss.use_multistate;

  Trainer trainer(config, dataset);
  if (resume) trainer.load(ckpt);
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open " + log_path.string() + " for writing");
  if (!resume) log << loss_log_header(multistate) << '\n';

  std::vector<LogRow> rows;
  try {
    while (trainer.current_step() < config.optim.steps) {
      const LogRow row = trainer.step();
      rows.push_back(row);
      log << format_loss_row(row, multistate) << '\n';
      if (progress && (row.step % 10 == 0 || row.step + 1 == config.optim.steps)) {
        *progress << "step " << row.step << " total " << row.total << '\n';
      }
      if (config.optim.checkpoint_every > 0 && trainer.current_step() % config.optim.checkpoint_every == 0) {
        log.flush();
        trainer.save(ckpt);
      }
    }
  } catch (const TrainingDivergence&) {
    log.flush();
    trainer.save(ckpt);
    throw;
  }
  log.flush();
  if (!log) throw IoError("failed writing " + log_path.string());
  trainer.save(ckpt);
  return rows;
}

SequencePrediction predict_sequence(const EmaVioModel& model, const SequenceRecord& record) {
  NoGradGuard no_grad;
  SequencePrediction out;
  out.sequence = record.id;
  out.relatives.reserve(record.intervals());
  for (std::size_t i = 0; i < record.intervals(); ++i) {
    const SequenceSample pair = make_sample(record, i, 2);
    out.relatives.push_back(tensor_to_pose(model.forward(pair).front()));
  }
  out.poses = accumulate_trajectory(out.relatives, record.poses.front());
  out.gt_poses = record.poses;
  return out;
}

EvalReport evaluate_predictions(const std::vector<SequencePrediction>& predictions, const Config& config) {
  if (predictions.empty()) throw ContractError("evaluate: dataset has no test sequences");
  const auto lengths = drift_lengths(config.eval.desk_scale);
  std::vector<DriftResult> parts;
  const std::size_t n = config.loss.sequence_length;
  double squared = 0.0, composed_squared = 0.0;
  std::size_t frames = 0, windows = 0;
  for (const auto& p : predictions) {
    parts.push_back(kitti_drift(p.poses, p.gt_poses, lengths, config.eval.stride));
    const double e = hpe(p.poses, p.gt_poses);
    squared += e * e * static_cast<double>(p.gt_poses.size());
    frames += p.gt_poses.size();
    const double c = composition_hpe(p.relatives, p.gt_poses, n);
    const std::size_t w = p.gt_poses.size() + 1 - n;
    composed_squared += c * c * static_cast<double>(w);
    windows += w;
  }
  EvalReport report;
  report.drift = merge_drift(parts);
  report.hpe_m = std::sqrt(squared / static_cast<double>(frames));
  report.composition_hpe_m = std::sqrt(composed_squared / static_cast<double>(windows));
  report.frame_count = frames;
  report.config = config.echo();
  return report;
}

EvalReport evaluate_model(const EmaVioModel& model, const Dataset& dataset, const Config& config) {
  const auto tests = dataset.split(Split::kTest);
  std::vector<SequencePrediction> predictions(tests.size());
  std::vector<std::exception_ptr> errors(tests.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < tests.size(); ++i) {
    try {
      predictions[i] = predict_sequence(model, *tests[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return evaluate_predictions(predictions, config);
}

}  // namespace emavio
