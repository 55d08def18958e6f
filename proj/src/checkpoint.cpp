#include "emavio/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "emavio/error.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace emavio {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'A', 'V', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Writer {
  std::vector<std::uint8_t> bytes;

  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void put_doubles(std::span<const double> v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    bytes.insert(bytes.end(), p, p + v.size() * sizeof(double));
  }
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end, std::string path)
      : bytes_(bytes), end_(end), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (n > end_ - pos_) damaged();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  void get_doubles(std::span<double> out) {
    if (out.size() > (end_ - pos_) / sizeof(double)) damaged();
    std::memcpy(out.data(), take(out.size() * sizeof(double)), out.size() * sizeof(double));
  }
  void skip_doubles(std::size_t n) {
    if (n > (end_ - pos_) / sizeof(double)) damaged();
    take(n * sizeof(double));
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::uint8_t* take(std::size_t n) {
    if (n > end_ - pos_) damaged();
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  [[noreturn]] void damaged() const { throw IoError("checkpoint " + path_ + " is truncated or damaged"); }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string path_;
};

std::vector<std::uint8_t> read_verified(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < sizeof kMagic + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError(path.string() + " is not a checkpoint");
  }
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (stored != fnv1a(bytes, bytes.size() - 8)) throw IoError("checkpoint " + path.string() + " fails its checksum");
  return bytes;
}

CheckpointHeader parse_header(Reader& rd, const std::filesystem::path& path) {
  rd.get<std::uint64_t>();  // magic
  CheckpointHeader h;
  h.version = rd.get<std::uint32_t>();
  if (h.version != kCheckpointVersion) {
    throw IoError("checkpoint " + path.string() + " has version " + std::to_string(h.version) + ", expected " +
                  std::to_string(kCheckpointVersion));
  }
  h.config_text = rd.get_string();
  h.step = rd.get<std::uint64_t>();
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Config& config, const ParameterSet& params,
                     std::uint64_t step) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_string(config.serialize());
  w.put<std::uint64_t>(step);
  w.put<std::uint64_t>(params.size());
  for (const auto& p : params.all()) {
    w.put_string(p.name);
    w.put<std::uint64_t>(p.value.rank());
    for (std::size_t d : p.value.shape()) w.put<std::uint64_t>(d);
    w.put<std::uint64_t>(p.step_count);
    w.put_doubles(p.value.data());
    w.put_doubles(p.adam_m);
    w.put_doubles(p.adam_v);
  }
  w.put<std::uint64_t>(fnv1a(w.bytes, w.bytes.size()));

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  const auto bytes = read_verified(path);
  Reader rd(bytes, bytes.size() - 8, path.string());
  return parse_header(rd, path);
}

std::uint64_t load_checkpoint(const std::filesystem::path& path, const Config& active, ParameterSet& params) {
  const auto bytes = read_verified(path);
  Reader rd(bytes, bytes.size() - 8, path.string());
  const CheckpointHeader header = parse_header(rd, path);
  const Config saved = Config::parse(header.config_text);
  if (saved.section("model") != active.section("model")) {
    throw ConfigError("checkpoint " + path.string() + " was saved with different model settings:\n" +
                      saved.section("model") + "active config has:\n" + active.section("model"));
  }
  const auto count = rd.get<std::uint64_t>();
  if (count != params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  // Parse into staging first so a mismatch leaves `params` untouched.
  struct Staged {
    std::uint64_t step_count;
    std::vector<double> value, m, v;
  };
  std::vector<Staged> staged(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Parameter& p = params.all()[i];
    const std::string name = rd.get_string();
    const auto rank = rd.get<std::uint64_t>();
    if (rank > 8) throw IoError("checkpoint " + path.string() + " is damaged");
    Shape shape(rank);
    for (auto& d : shape) d = rd.get<std::uint64_t>();
    if (name != p.name || shape != p.value.shape()) {
      throw ConfigError("checkpoint parameter " + name + " " + shape_str(shape) + " does not match model parameter " +
                        p.name + " " + shape_str(p.value.shape()));
    }
    Staged& s = staged[i];
    s.step_count = rd.get<std::uint64_t>();
    for (auto* buf : {&s.value, &s.m, &s.v}) {
      buf->resize(p.value.numel());
      rd.get_doubles(*buf);
    }
  }
  if (!rd.done()) throw IoError("checkpoint " + path.string() + " has trailing data");
  for (std::size_t i = 0; i < count; ++i) {
    Parameter& p = params.all()[i];
    auto dst = p.value.mutable_data();
    std::copy(staged[i].value.begin(), staged[i].value.end(), dst.begin());
    p.adam_m = std::move(staged[i].m);
    p.adam_v = std::move(staged[i].v);
    p.step_count = staged[i].step_count;
    p.value.zero_grad();
  }
  return header.step;
}

}  // namespace emavio
