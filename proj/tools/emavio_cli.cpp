#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "emavio/checkpoint.hpp"
#include "emavio/config.hpp"
#include "emavio/dataset.hpp"
#include "emavio/error.hpp"
#include "emavio/evaluation.hpp"
#include "emavio/gradcheck_suite.hpp"
#include "emavio/kitti.hpp"
#include "emavio/model.hpp"
#include "emavio/trainer.hpp"

namespace {

using namespace emavio;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> precision;
};

Config load_config(const std::string& path, const Globals& g) {
  Config c = Config::load(path);
  if (g.seed) c.train.seed = *g.seed;
  if (g.precision) c.train.precision = parse_precision(*g.precision);
  return c;
}

void print_ledger(const std::vector<BlockLedger>& ledger) {
  std::size_t params = 0, macs = 0;
  std::printf("%-12s %12s %12s\n", "block", "params", "macs");
  for (const auto& b : ledger) {
    std::printf("%-12s %12zu %12zu\n", b.name.c_str(), b.params, b.macs);
    params += b.params;
    macs += b.macs;
  }
  std::printf("%-12s %12zu %12zu\n", "total", params, macs);
}

int cmd_synth(const std::string& spec_path, const std::string& out, const Globals& g) {
  Config c = Config::load(spec_path);
  if (g.seed) c.synth.seed = *g.seed;
  const Dataset ds = synthesize_dataset(c.synth);
  const DatasetManifest m = write_dataset(out, ds);
  std::size_t frames = 0;
  for (const auto& e : m.entries) frames += e.frames;
  std::printf("wrote %zu sequences (%zu frames) to %s\n", m.entries.size(), frames, out.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out, bool resume,
              const Globals& g) {
  const Config c = load_config(config_path, g);
  const Dataset ds = read_dataset(data);
  const auto rows = run_training(c, ds, out, resume, &std::cout);
  if (!rows.empty()) {
    std::printf("trained to step %zu, total loss %.6g -> %.6g\n", rows.back().step + 1, rows.front().total,
                rows.back().total);
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt, const std::string& data,
             const std::string& report_path, const Globals& g) {
  const Config c = load_config(config_path, g);
  EmaVioModel model(c.model, c.train.seed);
  load_checkpoint(ckpt, c, model.params());
  const Dataset ds = read_dataset(data);
  const EvalReport report = evaluate_model(model, ds, c);
  emit_report(report, report_path);
  std::printf("t_rel %.4f %%  r_rel %.4f deg/100m  hpe %.4f m  composed hpe %.4f m  (%zu frames)\n",
              report.drift.t_rel_avg, report.drift.r_rel_avg, report.hpe_m, report.composition_hpe_m, report.frame_count);
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& data, const std::string& poses_out,
              std::optional<std::uint32_t> sequence) {
  const Config c = Config::parse(read_checkpoint_header(ckpt).config_text);
  EmaVioModel model(c.model, c.train.seed);
  load_checkpoint(ckpt, c, model.params());
  const Dataset ds = read_dataset(data);
  const SequenceRecord* record = nullptr;
  for (const auto& r : ds.sequences) {
    if (sequence ? r.id == *sequence : r.split == Split::kTest) {
      record = &r;
      break;
    }
  }
  if (!record && !sequence && !ds.sequences.empty()) record = &ds.sequences.front();
  if (!record) throw ContractError("infer: no matching sequence in " + data);
  const SequencePrediction p = predict_sequence(model, *record);
  write_kitti_poses(std::filesystem::path(poses_out), p.poses);
  std::printf("wrote %zu poses of sequence %u to %s\n", p.poses.size(), record->id, poses_out.c_str());
  return 0;
}

int cmd_gradcheck(const std::string& config_path, const Globals& g) {
  Config c = load_config(config_path, g);
  c.train.precision = Precision::kF64;
  const auto outcomes = run_gradcheck_suite(default_gradcheck_blocks(c));
  bool ok = true;
  std::printf("%-18s %14s %10s %8s  %s\n", "block", "max_rel_err", "tol", "coords", "result");
  for (const auto& o : outcomes) {
    std::printf("%-18s %14.3e %10.0e %8zu  %s\n", o.name.c_str(), o.result.max_relative_error, o.tolerance,
                o.result.coords_checked, o.passed ? "pass" : "FAIL");
    ok = ok && o.passed;
  }
  return ok ? 0 : 4;
}

int cmd_params(const std::string& config_path, const Globals& g) {
  const Config c = load_config(config_path, g);
  std::printf("fusion_mode = %s\n", to_string(c.model.fusion.mode).c_str());
  print_ledger(parameter_ledger(c.model));

  ModelConfig ema = c.model, lstm = c.model;
  ema.fusion.mode = FusionMode::kEma;
  lstm.fusion.mode = FusionMode::kLstm;
  const auto a = parameter_ledger(ema), b = parameter_ledger(lstm);
  std::printf("\nfusion block at tokens=%zu token_dim=%zu lstm_hidden=%zu\n", c.model.fusion.tokens,
              c.model.fusion.token_dim, c.model.fusion.lstm_hidden);
  std::printf("%-12s %12s %12s\n", "mode", "params", "macs");
  std::printf("%-12s %12zu %12zu\n", "ema", a[2].params, a[2].macs);
  std::printf("%-12s %12zu %12zu\n", "lstm", b[2].params, b[2].macs);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual-inertial odometry with external memory attention"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Override the seed of the command (training or synthesis)");
  app.add_option("--precision", g.precision, "Parameter storage precision during training")
      ->check(CLI::IsMember({"f32", "f64"}));

  std::string spec, out, config, data, ckpt, report, poses_out;
  bool resume = false;
  std::optional<std::uint32_t> sequence;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--spec", spec, "Config file whose [synth] section describes the data")->required();
  synth->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config)->required();
  train->add_option("--data", data)->required();
  train->add_option("--out", out)->required();
  train->add_flag("--resume", resume, "Continue from <out>/checkpoint.bin");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("--config", config)->required();
  eval->add_option("--ckpt", ckpt)->required();
  eval->add_option("--data", data)->required();
  eval->add_option("--report", report, "JSON report path; a CSV is written next to it")->required();

  auto* infer = app.add_subcommand("infer", "Write predicted poses in KITTI format");
  infer->add_option("--ckpt", ckpt)->required();
  infer->add_option("--data", data)->required();
  infer->add_option("--poses-out", poses_out)->required();
  infer->add_option("--sequence", sequence, "Sequence id (default: first test sequence)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every block");
  gradcheck->add_option("--config", config)->required();

  auto* params = app.add_subcommand("params", "Per-block parameter and MAC counts");
  params->add_option("--config", config)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(spec, out, g);
    if (*train) return cmd_train(config, data, out, resume, g);
    if (*eval) return cmd_eval(config, ckpt, data, report, g);
    if (*infer) return cmd_infer(ckpt, data, poses_out, sequence);
    if (*gradcheck) return cmd_gradcheck(config, g);
    if (*params) return cmd_params(config, g);
  } catch (const TrainingDivergence& e) {
    std::cerr << "error: " << e.what() << " (last good checkpoint kept)\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
