#include "emavio/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "emavio/error.hpp"
#include "text_format.hpp"

namespace emavio {

namespace {

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

#define EMAVIO_SIZE(sec, name, member)                                                   \
  Field {                                                                                \
    sec, name, [](const Config& c) { return std::to_string(c.member); },                 \
        [](Config& c, const std::string& v) {                                            \
          c.member = static_cast<decltype(c.member)>(detail::parse_u64(v, sec "." name)); \
        }                                                                                \
  }
#define EMAVIO_REAL(sec, name, member)                                                         \
  Field {                                                                                      \
    sec, name, [](const Config& c) { return detail::format_double(c.member); },                \
        [](Config& c, const std::string& v) { c.member = detail::parse_double(v, sec "." name); } \
  }
#define EMAVIO_BOOL(sec, name, member)                                                       \
  Field {                                                                                    \
    sec, name, [](const Config& c) { return detail::format_bool(c.member); },                \
        [](Config& c, const std::string& v) { c.member = detail::parse_bool(v, sec "." name); } \
  }
#define EMAVIO_ENUM(sec, name, member, parser)                                 \
  Field {                                                                      \
    sec, name, [](const Config& c) { return to_string(c.member); },            \
        [](Config& c, const std::string& v) { c.member = parser(std::string(detail::trim(v))); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      EMAVIO_SIZE("model", "image_channels", model.visual.channels),
      EMAVIO_SIZE("model", "image_height", model.visual.height),
      EMAVIO_SIZE("model", "image_width", model.visual.width),
      EMAVIO_SIZE("model", "visual_base_channels", model.visual.base_channels),
      EMAVIO_SIZE("model", "visual_feature_dim", model.visual.feature_dim),
      EMAVIO_SIZE("model", "imu_window", model.inertial.window),
      EMAVIO_BOOL("model", "use_wavenet", model.inertial.use_wavenet),
      EMAVIO_BOOL("model", "imu_normalize", model.inertial.normalize_input),
      EMAVIO_SIZE("model", "wavenet_channels", model.inertial.channels),
      EMAVIO_SIZE("model", "wavenet_layers", model.inertial.layers),
      EMAVIO_SIZE("model", "wavenet_kernel", model.inertial.kernel),
      EMAVIO_SIZE("model", "inertial_lstm_hidden", model.inertial.lstm_hidden),
      EMAVIO_SIZE("model", "inertial_feature_dim", model.inertial.feature_dim),
      EMAVIO_ENUM("model", "fusion_mode", model.fusion.mode, parse_fusion_mode),
      EMAVIO_SIZE("model", "tokens", model.fusion.tokens),
      EMAVIO_SIZE("model", "token_dim", model.fusion.token_dim),
      EMAVIO_SIZE("model", "memory_slots", model.fusion.memory_slots),
      EMAVIO_ENUM("model", "memory_target", model.fusion.memory_target, parse_memory_target),
      EMAVIO_ENUM("model", "memory_norm", model.fusion.memory_norm, parse_memory_norm),
      EMAVIO_BOOL("model", "attention_scaling", model.fusion.scale_logits),
      EMAVIO_SIZE("model", "fusion_lstm_hidden", model.fusion.lstm_hidden),
      EMAVIO_SIZE("model", "regressor_hidden", model.regressor_hidden),
      EMAVIO_REAL("loss", "lambda1", loss.lambda1),
      EMAVIO_REAL("loss", "lambda2", loss.lambda2),
      EMAVIO_BOOL("loss", "use_multistate", loss.use_multistate),
      EMAVIO_SIZE("loss", "sequence_length", loss.sequence_length),
      EMAVIO_REAL("optim", "lr", optim.adam.lr),
      EMAVIO_REAL("optim", "beta1", optim.adam.beta1),
      EMAVIO_REAL("optim", "beta2", optim.adam.beta2),
      EMAVIO_REAL("optim", "eps", optim.adam.eps),
      EMAVIO_SIZE("optim", "batch_size", optim.batch_size),
      EMAVIO_SIZE("optim", "steps", optim.steps),
      EMAVIO_SIZE("optim", "checkpoint_every", optim.checkpoint_every),
      EMAVIO_SIZE("train", "seed", train.seed),
      EMAVIO_ENUM("train", "precision", train.precision, parse_precision),
      EMAVIO_BOOL("train", "log_wall_time", train.log_wall_time),
      EMAVIO_SIZE("train", "window_stride", train.window_stride),
      Field{"eval", "lengths", [](const Config& c) { return std::string(c.eval.desk_scale ? "desk" : "full"); },
            [](Config& c, const std::string& v) {
              const auto t = detail::trim(v);
              if (t == "desk") c.eval.desk_scale = true;
              else if (t == "full") c.eval.desk_scale = false;
              else throw ConfigError("eval.lengths: expected desk or full, got '" + std::string(t) + "'");
            }},
      EMAVIO_SIZE("eval", "stride", eval.stride),
  };
  return table;
}

#undef EMAVIO_SIZE
#undef EMAVIO_REAL
#undef EMAVIO_BOOL
#undef EMAVIO_ENUM

const std::vector<std::string>& section_order() {
  static const std::vector<std::string> order{"model", "loss", "optim", "train", "eval", "synth"};
  return order;
}

std::vector<std::pair<std::string, std::string>> section_fields(const Config& c, const std::string& section) {
  if (section == "synth") return c.synth.fields();
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields())
    if (section == f.section) out.emplace_back(f.key, f.get(c));
  return out;
}

void set_value(Config& c, const std::string& section, const std::string& key, const std::string& value) {
  if (section == "synth") {
    c.synth.set_field(key, value);
    return;
  }
  for (const auto& f : fields()) {
    if (section == f.section && key == f.key) {
      f.set(c, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + section + "." + key + "'");
}

}  // namespace

Precision parse_precision(const std::string& text) {
  if (text == "f32") return Precision::kF32;
  if (text == "f64") return Precision::kF64;
  throw ConfigError("unknown precision '" + text + "' (expected f32 or f64)");
}

std::string to_string(Precision precision) { return precision == Precision::kF32 ? "f32" : "f64"; }

Config Config::parse(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  Config c;
  const std::set<std::string> known(section_order().begin(), section_order().end());
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) throw ConfigError("config: key '" + section + "' outside of a section");
    if (!known.count(section)) throw ConfigError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : keys) {
      if (!value.empty()) throw ConfigError("config: nested key under " + section + "." + key);
      set_value(c, section, key, value.data());
    }
  }
  c.validate();
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

std::string Config::section(const std::string& name) const {
  std::ostringstream out;
  out << '[' << name << "]\n";
  for (const auto& [key, value] : section_fields(*this, name)) out << key << " = " << value << '\n';
  return out.str();
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& s : section_order()) {
    if (!out.empty()) out += '\n';
    out += section(s);
  }
  return out;
}

std::map<std::string, std::string> Config::echo() const {
  std::map<std::string, std::string> out;
  for (const auto& s : section_order())
    for (const auto& [key, value] : section_fields(*this, s)) out[s + "." + key] = value;
  return out;
}

void Config::validate() const {
  const auto& f = model.fusion;
  if (model.visual.feature_dim + model.inertial.feature_dim != f.tokens * f.token_dim) {
    throw ConfigError("config: visual_feature_dim + inertial_feature_dim (" +
                      std::to_string(model.visual.feature_dim + model.inertial.feature_dim) +
                      ") must equal tokens * token_dim (" + std::to_string(f.tokens * f.token_dim) + ")");
  }
  if (f.mode == FusionMode::kEma && f.memory_slots == 0) throw ConfigError("config: model.memory_slots must be positive");
  if (loss.sequence_length < 2) throw ConfigError("config: loss.sequence_length must be at least 2");
  if (loss.lambda1 < 0.0 || loss.lambda2 < 0.0) throw ConfigError("config: loss weights must be non-negative");
  if (optim.batch_size == 0) throw ConfigError("config: optim.batch_size must be positive");
  if (!(optim.adam.lr > 0.0)) throw ConfigError("config: optim.lr must be positive");
  if (optim.adam.beta1 < 0.0 || optim.adam.beta1 >= 1.0 || optim.adam.beta2 < 0.0 || optim.adam.beta2 >= 1.0) {
    throw ConfigError("config: optim betas must lie in [0, 1)");
  }
  if (!(optim.adam.eps > 0.0)) throw ConfigError("config: optim.eps must be positive");
  if (train.window_stride == 0) throw ConfigError("config: train.window_stride must be positive");
  if (eval.stride == 0) throw ConfigError("config: eval.stride must be positive");
  if (model.regressor_hidden == 0) throw ConfigError("config: model.regressor_hidden must be positive");
}

}  // namespace emavio
