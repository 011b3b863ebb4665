#include "ovenet/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace ovenet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
}

template <typename I>
I parse_int(const std::string& key, const std::string& v) {
  I out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config: " + key + " expects a boolean, got '" + v + "'");
}

std::pair<std::int64_t, std::int64_t> parse_size(const std::string& key, const std::string& v) {
  const auto x = v.find('x');
  if (x == std::string::npos) throw ConfigError("config: " + key + " expects HxW, got '" + v + "'");
  return {parse_int<std::int64_t>(key, v.substr(0, x)), parse_int<std::int64_t>(key, v.substr(x + 1))};
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define DOUBLE_FIELD(KEY, MEMBER)                                            \
  Field {                                                                    \
    KEY, [](const TrainConfig& c) { return fmt_double(c.MEMBER); },          \
        [](TrainConfig& c, const std::string& v) { c.MEMBER = parse_double(KEY, v); } \
  }
#define INT_FIELD(KEY, MEMBER)                                                            \
  Field {                                                                                 \
    KEY, [](const TrainConfig& c) { return std::to_string(c.MEMBER); },                   \
        [](TrainConfig& c, const std::string& v) { c.MEMBER = parse_int<decltype(c.MEMBER)>(KEY, v); } \
  }
#define BOOL_FIELD(KEY, MEMBER)                                            \
  Field {                                                                  \
    KEY, [](const TrainConfig& c) { return fmt_bool(c.MEMBER); },          \
        [](TrainConfig& c, const std::string& v) { c.MEMBER = parse_bool(KEY, v); } \
  }
#define STRING_FIELD(KEY, MEMBER)                                     \
  Field {                                                             \
    KEY, [](const TrainConfig& c) { return c.MEMBER; },               \
        [](TrainConfig& c, const std::string& v) { c.MEMBER = v; }    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      DOUBLE_FIELD("base_lr", base_lr),
      DOUBLE_FIELD("momentum", momentum),
      DOUBLE_FIELD("weight_decay", weight_decay),
      DOUBLE_FIELD("poly_power", poly_power),
      INT_FIELD("epochs", epochs),
      INT_FIELD("batch_size", batch_size),
      INT_FIELD("seed", seed),
      INT_FIELD("eval_every", eval_every),
      INT_FIELD("eval_batch_size", eval_batch_size),
      Field{"precision", [](const TrainConfig& c) { return precision_name(c.precision); },
            [](TrainConfig& c, const std::string& v) {
              if (v == "f32") {
                c.precision = Precision::kF32;
              } else if (v == "f64") {
                c.precision = Precision::kF64;
              } else {
                throw ConfigError("config: precision must be f32 or f64, got '" + v + "'");
              }
            }},
      BOOL_FIELD("freeze_trunk", freeze_trunk),
      STRING_FIELD("init_from", init_from),
      Field{"crop",
            [](const TrainConfig& c) {
              return std::to_string(c.augment.crop_height) + "x" + std::to_string(c.augment.crop_width);
            },
            [](TrainConfig& c, const std::string& v) {
              std::tie(c.augment.crop_height, c.augment.crop_width) = parse_size("crop", v);
            }},
      DOUBLE_FIELD("augment.scale_min", augment.scale_min),
      DOUBLE_FIELD("augment.scale_max", augment.scale_max),
      DOUBLE_FIELD("augment.flip_probability", augment.flip_probability),
      DOUBLE_FIELD("loss.kappa", loss.kappa),
      DOUBLE_FIELD("loss.lambda", loss.lambda),
      BOOL_FIELD("loss.ohem", loss.ohem_enabled),
      DOUBLE_FIELD("loss.ohem_threshold", loss.ohem_threshold),
      DOUBLE_FIELD("loss.ohem_min_kept_fraction", loss.ohem_min_kept_fraction),
      BOOL_FIELD("loss.ohem_all_terms", loss.ohem_all_terms),
      INT_FIELD("loss.ignore_id", loss.ignore_id),
      INT_FIELD("model.in_channels", model.in_channels),
      INT_FIELD("model.trunk_blocks", model.trunk_blocks),
      INT_FIELD("model.branch_at", model.branch_at),
      INT_FIELD("model.head_blocks", model.head_blocks),
      INT_FIELD("model.offset_head_blocks", model.offset_head_blocks),
      INT_FIELD("model.base_width", model.base_width),
      INT_FIELD("model.num_classes", model.num_classes),
      DOUBLE_FIELD("model.tau", model.tau),
      INT_FIELD("model.head_downscale", model.head_downscale),
      BOOL_FIELD("model.two_head", model.two_head_enabled),
      BOOL_FIELD("model.fuse_probabilities", model.fuse_probabilities),
      Field{"model.offset_scale",
            [](const TrainConfig& c) {
              return std::string(c.model.offset_scale == OffsetScale::kPerAxis ? "per_axis" : "max_extent");
            },
            [](TrainConfig& c, const std::string& v) {
              if (v == "per_axis") {
                c.model.offset_scale = OffsetScale::kPerAxis;
              } else if (v == "max_extent") {
                c.model.offset_scale = OffsetScale::kMaxExtent;
              } else {
                throw ConfigError("config: model.offset_scale must be per_axis or max_extent");
              }
            }},
      BOOL_FIELD("model.zero_offsets", model.zero_offsets),
      STRING_FIELD("train_data", train_data),
      STRING_FIELD("val_data", val_data),
      INT_FIELD("synth.train_count", synth_train_count),
      INT_FIELD("synth.val_count", synth_val_count),
      INT_FIELD("synth.train_seed", synth.seed),
      INT_FIELD("synth.val_seed", synth_val_seed),
      INT_FIELD("synth.height", synth.height),
      INT_FIELD("synth.width", synth.width),
      INT_FIELD("synth.min_shapes", synth.min_shapes),
      INT_FIELD("synth.max_shapes", synth.max_shapes),
      DOUBLE_FIELD("synth.color_jitter", synth.color_jitter),
      DOUBLE_FIELD("synth.noise_sigma", synth.noise_sigma),
  };
  return kFields;
}

std::string resolve_alias(const std::string& key) {
  if (key == "tau") return "model.tau";
  if (key == "ohem") return "loss.ohem";
  if (key == "frozen" || key == "freeze") return "freeze_trunk";
  if (key == "branch" || key == "branch_at") return "model.branch_at";
  if (key == "two_head") return "model.two_head";
  return key;
}

}  // namespace

std::string precision_name(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

void TrainConfig::validate() const {
  if (!(base_lr >= 0.0)) throw ConfigError("train: base_lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0,1)");
  if (!(poly_power > 0.0)) throw ConfigError("train: poly_power must be positive");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("train: batch sizes must be >= 1");
  if (freeze_trunk && !model.two_head_enabled) throw ConfigError("train: freeze_trunk needs the offset head");
  model.validate();
  loss.validate();
  if (augment.crop_height % model.head_downscale != 0 || augment.crop_width % model.head_downscale != 0) {
    throw ConfigError("train: crop must be divisible by model.head_downscale");
  }
}

void apply_setting(TrainConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = resolve_alias(trim(raw_key));
  const std::string value = trim(raw_value);
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      if (key == "model.num_classes") cfg.synth.num_classes = cfg.model.num_classes;
      if (key == "loss.ignore_id") cfg.augment.ignore_id = cfg.loss.ignore_id;
      return;
    }
  }
  throw ConfigError("config: unknown key '" + raw_key + "'");
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  for (const auto& [k, v] : parse_key_values(text)) apply_setting(base, k, v);
  return base;
}

TrainConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace ovenet
