#pragma once

// Synthetic dataset generation, the on-disk container, and the training
// samples cut from it.
//
// A dataset directory holds manifest.txt (plain text) and data.bin (little
// endian records with FNV-1a checksums). The layout is documented in the
// README.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "emavio/encoders.hpp"
#include "emavio/geometry.hpp"
#include "emavio/render.hpp"
#include "emavio/trajectory.hpp"

namespace emavio {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetSpec {
  std::uint64_t seed = 1;
  std::size_t sequences = 32;      // training split
  std::size_t test_sequences = 1;  // held-out split
  double duration_s = 4.0;
  double test_duration_s = 100.0;
  std::uint64_t texture_seed = 7;
  TrajectorySpec motion;  // seed and duration_s are set per sequence
  RenderSpec render;

  // Every field as (key, text) in a fixed order, and the inverse setter.
  // Unknown keys raise ConfigError.
  std::vector<std::pair<std::string, std::string>> fields() const;
  void set_field(const std::string& key, const std::string& value);
};

enum class Split : std::uint8_t { kTrain = 0, kTest = 1 };
std::string to_string(Split split);

// One generated sequence. Poses are 64-bit; observations are stored 32-bit.
struct SequenceRecord {
  std::uint32_t id = 0;
  Split split = Split::kTrain;
  std::size_t frames = 0;
  std::size_t imu_length = 0;  // samples per interval window
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<SE3Transform> poses;  // frames
  std::vector<PoseDelta> relatives; // frames - 1
  std::vector<float> imu;           // (frames - 1) x 6 x imu_length
  std::vector<float> images;        // (frames - 1) x 2 x height x width

  std::size_t intervals() const { return frames - 1; }
};

struct Dataset {
  DatasetSpec spec;
  std::vector<SequenceRecord> sequences;

  std::vector<const SequenceRecord*> split(Split which) const;
};

SequenceRecord generate_sequence(const DatasetSpec& spec, std::uint32_t id, Split split);
Dataset synthesize_dataset(const DatasetSpec& spec);

struct ManifestEntry {
  std::uint32_t id = 0;
  Split split = Split::kTrain;
  std::size_t frames = 0;
  std::size_t imu_rows = 0;  // (frames - 1) * imu_length
  std::uint64_t offset = 0;  // record start in data.bin
  std::uint64_t bytes = 0;   // length prefix + payload + checksum
};

struct DatasetManifest {
  std::uint32_t version = kDatasetVersion;
  DatasetSpec spec;
  std::vector<ManifestEntry> entries;
};

// Throws IoError when the directory cannot be written.
DatasetManifest write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
DatasetManifest read_manifest(const std::filesystem::path& dir);
// DatasetError with code kVersionMismatch, kTruncated, kChecksumMismatch or
// kMalformed. A file cut inside a record's checksum trailer fails as a
// checksum mismatch; a file cut before the trailer is truncated.
Dataset read_dataset(const std::filesystem::path& dir);

// n frames of one sequence: n - 1 image pairs, IMU windows and relative
// poses, plus the first-to-last pose.
struct SequenceSample {
  std::uint32_t sequence = 0;
  std::size_t start = 0;
  std::vector<FramePair> frames;
  std::vector<Tensor> imu;  // 6 x imu_length each
  std::vector<PoseDelta> gt_rel;
  PoseDelta gt_seq;

  std::size_t intervals() const { return gt_rel.size(); }
};

// Frames [start, start + n). Throws ContractError when out of range or n < 2.
SequenceSample make_sample(const SequenceRecord& record, std::size_t start, std::size_t n);

// (sequence index, start frame) of every n-frame window in the split, with
// start frames stepping by `stride`.
std::vector<std::pair<std::size_t, std::size_t>> sample_windows(const Dataset& dataset, Split split, std::size_t n,
                                                                std::size_t stride = 1);

}  // namespace emavio
