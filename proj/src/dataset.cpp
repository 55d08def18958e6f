#include "emavio/dataset.hpp"

#include <bit>
#include <cstring>
#include <exception>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "emavio/error.hpp"
#include "emavio/rng.hpp"
#include "text_format.hpp"

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

namespace emavio {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'A', 'V', 'D', 'A', 'T', 'A'};
constexpr const char* kManifestHeader = "emavio-dataset";

struct SpecField {
  const char* key;
  std::function<std::string(const DatasetSpec&)> get;
  std::function<void(DatasetSpec&, const std::string&)> set;
};

template <typename T>
SpecField size_field(const char* key, T DatasetSpec::*member) {
  return {key, [member](const DatasetSpec& s) { return std::to_string(s.*member); },
          [member, key](DatasetSpec& s, const std::string& v) {
            s.*member = static_cast<T>(detail::parse_u64(v, key));
          }};
}

SpecField real_field(const char* key, double DatasetSpec::*member) {
  return {key, [member](const DatasetSpec& s) { return detail::format_double(s.*member); },
          [member, key](DatasetSpec& s, const std::string& v) { s.*member = detail::parse_double(v, key); }};
}

template <typename Sub, typename T>
SpecField nested_size(const char* key, Sub DatasetSpec::*outer, T Sub::*member) {
  return {key, [=](const DatasetSpec& s) { return std::to_string(s.*outer.*member); },
          [=](DatasetSpec& s, const std::string& v) { s.*outer.*member = static_cast<T>(detail::parse_u64(v, key)); }};
}

template <typename Sub>
SpecField nested_real(const char* key, Sub DatasetSpec::*outer, double Sub::*member) {
  return {key, [=](const DatasetSpec& s) { return detail::format_double(s.*outer.*member); },
          [=](DatasetSpec& s, const std::string& v) { s.*outer.*member = detail::parse_double(v, key); }};
}

const std::vector<SpecField>& spec_fields() {
  static const std::vector<SpecField> fields{
      size_field("seed", &DatasetSpec::seed),
      size_field("sequences", &DatasetSpec::sequences),
      size_field("test_sequences", &DatasetSpec::test_sequences),
      real_field("duration_s", &DatasetSpec::duration_s),
      real_field("test_duration_s", &DatasetSpec::test_duration_s),
      size_field("texture_seed", &DatasetSpec::texture_seed),
      nested_size("image_rate_hz", &DatasetSpec::motion, &TrajectorySpec::image_rate_hz),
      nested_size("imu_rate_hz", &DatasetSpec::motion, &TrajectorySpec::imu_rate_hz),
      nested_real("speed_min", &DatasetSpec::motion, &TrajectorySpec::speed_min),
      nested_real("speed_max", &DatasetSpec::motion, &TrajectorySpec::speed_max),
      nested_real("speed_wobble", &DatasetSpec::motion, &TrajectorySpec::speed_wobble),
      nested_real("yaw_rate_max", &DatasetSpec::motion, &TrajectorySpec::yaw_rate_max),
      nested_real("yaw_wobble", &DatasetSpec::motion, &TrajectorySpec::yaw_wobble),
      nested_real("pitch_amplitude", &DatasetSpec::motion, &TrajectorySpec::pitch_amplitude),
      nested_real("roll_amplitude", &DatasetSpec::motion, &TrajectorySpec::roll_amplitude),
      nested_real("gyro_noise", &DatasetSpec::motion, &TrajectorySpec::gyro_noise),
      nested_real("accel_noise", &DatasetSpec::motion, &TrajectorySpec::accel_noise),
      nested_size("image_height", &DatasetSpec::render, &RenderSpec::height),
      nested_size("image_width", &DatasetSpec::render, &RenderSpec::width),
      nested_real("pixels_per_meter", &DatasetSpec::render, &RenderSpec::pixels_per_meter),
  };
  return fields;
}

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  template <typename T>
  void put_array(const std::vector<T>& values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size() * sizeof(T));
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  template <typename T>
  void get_array(std::vector<T>& out, std::size_t count) {
    if (count > (size_ - pos_) / sizeof(T)) malformed();
    out.resize(count);
    std::memcpy(out.data(), take(count * sizeof(T)), count * sizeof(T));
  }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) malformed();
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  [[noreturn]] static void malformed() {
    throw DatasetError(DataErrorCode::kMalformed, "dataset: record payload shorter than its declared contents");
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_record(const SequenceRecord& r) {
  ByteWriter w;
  w.put<std::uint32_t>(r.id);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(r.split));
  for (std::size_t v : {r.frames, r.imu_length, r.height, r.width}) w.put<std::uint64_t>(v);
  for (const auto& pose : r.poses) {
    const Eigen::Matrix4d& m = pose.matrix();
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 4; ++col) w.put<double>(m(row, col));
  }
  for (const auto& rel : r.relatives) {
    for (int i = 0; i < 3; ++i) w.put<double>(rel.t[i]);
    for (int i = 0; i < 3; ++i) w.put<double>(rel.psi[i]);
  }
  w.put_array(r.imu);
  w.put_array(r.images);
  return std::move(w.bytes());
}

SequenceRecord decode_record(const std::vector<std::uint8_t>& payload) {
  ByteReader rd(payload.data(), payload.size());
  SequenceRecord r;
  r.id = rd.get<std::uint32_t>();
  const auto split = rd.get<std::uint8_t>();
  if (split > 1) throw DatasetError(DataErrorCode::kMalformed, "dataset: unknown split tag");
  r.split = static_cast<Split>(split);
  r.frames = rd.get<std::uint64_t>();
  r.imu_length = rd.get<std::uint64_t>();
  r.height = rd.get<std::uint64_t>();
  r.width = rd.get<std::uint64_t>();
  if (r.frames < 2) throw DatasetError(DataErrorCode::kMalformed, "dataset: record with fewer than two frames");
  std::vector<double> values;
  rd.get_array(values, r.frames * 12);
  r.poses.reserve(r.frames);
  for (std::size_t f = 0; f < r.frames; ++f) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    for (int row = 0; row < 3; ++row)
      for (int col = 0; col < 4; ++col) m(row, col) = values[f * 12 + static_cast<std::size_t>(row * 4 + col)];
    r.poses.emplace_back(m);
  }
  rd.get_array(values, r.intervals() * 6);
  r.relatives.resize(r.intervals());
  for (std::size_t i = 0; i < r.intervals(); ++i) {
    r.relatives[i].t = Eigen::Vector3d(values[i * 6], values[i * 6 + 1], values[i * 6 + 2]);
    r.relatives[i].psi = Eigen::Vector3d(values[i * 6 + 3], values[i * 6 + 4], values[i * 6 + 5]);
  }
  rd.get_array(r.imu, r.intervals() * 6 * r.imu_length);
  rd.get_array(r.images, r.intervals() * 2 * r.height * r.width);
  if (!rd.done()) throw DatasetError(DataErrorCode::kMalformed, "dataset: trailing bytes in record payload");
  return r;
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::pair<std::string, std::string>> DatasetSpec::fields() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : spec_fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

void DatasetSpec::set_field(const std::string& key, const std::string& value) {
  for (const auto& f : spec_fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown synth key '" + key + "'");
}

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

std::vector<const SequenceRecord*> Dataset::split(Split which) const {
  std::vector<const SequenceRecord*> out;
  for (const auto& s : sequences)
    if (s.split == which) out.push_back(&s);
  return out;
}

SequenceRecord generate_sequence(const DatasetSpec& spec, std::uint32_t id, Split split) {
  TrajectorySpec motion = spec.motion;
  motion.seed = Rng::mix(spec.seed ^ Rng::mix(id + 1));
  motion.duration_s = split == Split::kTrain ? spec.duration_s : spec.test_duration_s;
  const Trajectory traj = generate_trajectory(motion);
  const auto windows = simulate_imu(MotionModel(motion), motion);

  SequenceRecord r;
  r.id = id;
  r.split = split;
  r.frames = traj.poses.size();
  r.imu_length = motion.imu_per_interval() + 1;
  r.height = spec.render.height;
  r.width = spec.render.width;
  r.poses = traj.poses;
  r.relatives = traj.relatives;
  r.imu.reserve(r.intervals() * 6 * r.imu_length);
  for (const auto& w : windows)
    for (double v : w.samples) r.imu.push_back(static_cast<float>(v));
  const std::size_t pixels = r.height * r.width;
  r.images.reserve(r.intervals() * 2 * pixels);
  for (std::size_t i = 0; i < r.intervals(); ++i) {
    const std::uint64_t texture = Rng::mix(spec.texture_seed ^ Rng::mix((std::uint64_t{id} << 32) + i));
    const ImagePair pair = render_frame_pair(r.relatives[i], texture, spec.render);
    r.images.insert(r.images.end(), pair.reference.begin(), pair.reference.end());
    r.images.insert(r.images.end(), pair.target.begin(), pair.target.end());
  }
  return r;
}

Dataset synthesize_dataset(const DatasetSpec& spec) {
  if (spec.sequences == 0) throw ConfigError("synth: need at least one training sequence");
  const std::size_t total = spec.sequences + spec.test_sequences;
  Dataset ds;
  ds.spec = spec;
  ds.sequences.resize(total);
  std::vector<std::exception_ptr> errors(total);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < total; ++i) {
    try {
      ds.sequences[i] = generate_sequence(spec, static_cast<std::uint32_t>(i),
                                          i < spec.sequences ? Split::kTrain : Split::kTest);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return ds;
}

DatasetManifest write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.spec = dataset.spec;
  ByteWriter data;
  data.bytes().insert(data.bytes().end(), std::begin(kMagic), std::end(kMagic));
  data.put<std::uint32_t>(kDatasetVersion);
  data.put<std::uint32_t>(static_cast<std::uint32_t>(dataset.sequences.size()));
  for (const auto& r : dataset.sequences) {
    if (r.frames != r.poses.size() || r.relatives.size() != r.intervals() ||
        r.imu.size() != r.intervals() * 6 * r.imu_length || r.images.size() != r.intervals() * 2 * r.height * r.width) {
      throw ContractError("write_dataset: sequence " + std::to_string(r.id) + " is internally inconsistent");
    }
    const auto payload = encode_record(r);
    ManifestEntry e;
    e.id = r.id;
    e.split = r.split;
    e.frames = r.frames;
    e.imu_rows = r.intervals() * r.imu_length;
    e.offset = data.bytes().size();
    e.bytes = 16 + payload.size();
    data.put<std::uint64_t>(payload.size());
    data.bytes().insert(data.bytes().end(), payload.begin(), payload.end());
    data.put<std::uint64_t>(fnv1a(payload.data(), payload.size()));
    manifest.entries.push_back(e);
  }
  write_file(dir / "data.bin", data.bytes().data(), data.bytes().size());

  std::ostringstream text;
  text << kManifestHeader << ' ' << kDatasetVersion << '\n';
  for (const auto& [key, value] : dataset.spec.fields()) text << "spec " << key << ' ' << value << '\n';
  for (const auto& e : manifest.entries) {
    text << "sequence " << e.id << ' ' << to_string(e.split) << ' ' << e.frames << ' ' << e.imu_rows << ' '
         << e.offset << ' ' << e.bytes << '\n';
  }
  text << "end\n";
  const std::string s = text.str();
  write_file(dir / "manifest.txt", s.data(), s.size());
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("cannot open " + (dir / "manifest.txt").string());
  DatasetManifest m;
  std::string line;
  if (!std::getline(in, line)) throw DatasetError(DataErrorCode::kTruncated, "dataset: empty manifest");
  {
    std::istringstream head(line);
    std::string tag;
    std::uint64_t version = 0;
    if (!(head >> tag >> version) || tag != kManifestHeader) {
      throw DatasetError(DataErrorCode::kMalformed, "dataset: manifest header missing");
    }
    if (version != kDatasetVersion) {
      throw DatasetError(DataErrorCode::kVersionMismatch, "dataset: manifest version " + std::to_string(version) +
                                                              " not supported (expected " +
                                                              std::to_string(kDatasetVersion) + ")");
    }
    m.version = static_cast<std::uint32_t>(version);
  }
  bool ended = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "end") {
      ended = true;
      break;
    }
    if (kind == "spec") {
      std::string key, value;
      ls >> key >> value;
      try {
        m.spec.set_field(key, value);
      } catch (const ConfigError& e) {
        throw DatasetError(DataErrorCode::kMalformed, std::string("dataset: manifest spec: ") + e.what());
      }
    } else if (kind == "sequence") {
      ManifestEntry e;
      std::string split;
      if (!(ls >> e.id >> split >> e.frames >> e.imu_rows >> e.offset >> e.bytes) ||
          (split != "train" && split != "test")) {
        throw DatasetError(DataErrorCode::kMalformed, "dataset: bad manifest line '" + line + "'");
      }
      e.split = split == "train" ? Split::kTrain : Split::kTest;
      m.entries.push_back(e);
    } else {
      throw DatasetError(DataErrorCode::kMalformed, "dataset: bad manifest line '" + line + "'");
    }
  }
  if (!ended) throw DatasetError(DataErrorCode::kTruncated, "dataset: manifest ends without its end marker");
  return m;
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const DatasetManifest manifest = read_manifest(dir);
  const auto bytes = read_file(dir / "data.bin");
  if (bytes.size() < 16) throw DatasetError(DataErrorCode::kTruncated, "dataset: data.bin shorter than its header");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DatasetError(DataErrorCode::kMalformed, "dataset: data.bin has the wrong magic");
  }
  std::uint32_t version = 0, count = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&count, bytes.data() + 12, 4);
  if (version != kDatasetVersion) {
    throw DatasetError(DataErrorCode::kVersionMismatch,
                       "dataset: data.bin version " + std::to_string(version) + " not supported");
  }
  if (count != manifest.entries.size()) {
    throw DatasetError(DataErrorCode::kMalformed, "dataset: manifest lists " + std::to_string(manifest.entries.size()) +
                                                      " sequences, data.bin holds " + std::to_string(count));
  }

  Dataset ds;
  ds.spec = manifest.spec;
  for (const auto& e : manifest.entries) {
    const std::string label = "dataset: sequence " + std::to_string(e.id);
    if (e.offset + 8 > bytes.size()) throw DatasetError(DataErrorCode::kTruncated, label + ": length prefix missing");
    std::uint64_t length = 0;
    std::memcpy(&length, bytes.data() + e.offset, 8);
    const std::uint64_t start = e.offset + 8;
    if (length > bytes.size() || start + length > bytes.size()) {
      throw DatasetError(DataErrorCode::kTruncated, label + ": payload cut short");
    }
    if (start + length + 8 > bytes.size()) {
      throw DatasetError(DataErrorCode::kChecksumMismatch, label + ": checksum trailer incomplete");
    }
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + start + length, 8);
    if (stored != fnv1a(bytes.data() + start, length)) {
      throw DatasetError(DataErrorCode::kChecksumMismatch, label + ": checksum mismatch");
    }
    std::vector<std::uint8_t> payload(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                                      bytes.begin() + static_cast<std::ptrdiff_t>(start + length));
    SequenceRecord r = decode_record(payload);
    if (r.id != e.id || r.split != e.split || r.frames != e.frames || r.intervals() * r.imu_length != e.imu_rows ||
        16 + length != e.bytes) {
      throw DatasetError(DataErrorCode::kMalformed, label + ": record disagrees with the manifest");
    }
    ds.sequences.push_back(std::move(r));
  }
  return ds;
}

SequenceSample make_sample(const SequenceRecord& record, std::size_t start, std::size_t n) {
  if (n < 2) throw ContractError("make_sample: need at least two frames");
  if (start + n > record.frames) {
    throw ContractError("make_sample: frames [" + std::to_string(start) + ", " + std::to_string(start + n) +
                        ") exceed sequence " + std::to_string(record.id) + " of " + std::to_string(record.frames));
  }
  SequenceSample s;
  s.sequence = record.id;
  s.start = start;
  const std::size_t pixels = record.height * record.width;
  const std::size_t imu_size = 6 * record.imu_length;
  for (std::size_t i = start; i + 1 < start + n; ++i) {
    const float* img = record.images.data() + i * 2 * pixels;
    ImagePair pair;
    pair.reference.assign(img, img + pixels);
    pair.target.assign(img + pixels, img + 2 * pixels);
    s.frames.push_back(to_frame_pair(pair, record.height, record.width));
    const float* imu = record.imu.data() + i * imu_size;
    s.imu.emplace_back(Shape{6, record.imu_length}, std::vector<double>(imu, imu + imu_size));
    s.gt_rel.push_back(record.relatives[i]);
  }
  s.gt_seq = transform_to_pose(record.poses[start].inverse() * record.poses[start + n - 1]);
  return s;
}

std::vector<std::pair<std::size_t, std::size_t>> sample_windows(const Dataset& dataset, Split split, std::size_t n,
                                                                std::size_t stride) {
  if (stride == 0) throw ConfigError("sample_windows: stride must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < dataset.sequences.size(); ++s) {
    const auto& r = dataset.sequences[s];
    if (r.split != split || r.frames < n) continue;
    for (std::size_t start = 0; start + n <= r.frames; start += stride) out.emplace_back(s, start);
  }
  return out;
}

}  // namespace emavio
