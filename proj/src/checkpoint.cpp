#include "ovenet/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "ovenet/serialize.hpp"

namespace ovenet {
namespace {

constexpr char kMagic[4] = {'O', 'V', 'C', 'K'};

std::string shape_field(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) out += (i ? "x" : "") + std::to_string(shape[i]);
  return out.empty() ? "scalar" : out;
}

struct Manifest {
  Precision precision = Precision::kF32;
  std::int64_t step = 0, t = 0, total = 0;
  std::string config_text;
  struct Entry {
    std::string name, group, shape;
    bool trainable = true;
  };
  std::vector<Entry> params;
};

Manifest parse_manifest(const std::string& text, const std::string& where) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  bool saw_precision = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "precision") {
      std::string v;
      ls >> v;
      if (v != "f32" && v != "f64") throw IoError(where + ": bad precision '" + v + "'");
      m.precision = v == "f32" ? Precision::kF32 : Precision::kF64;
      saw_precision = true;
    } else if (tag == "step") {
      ls >> m.step;
    } else if (tag == "opt.t") {
      ls >> m.t;
    } else if (tag == "opt.total") {
      ls >> m.total;
    } else if (tag == "config") {
      std::string rest;
      std::getline(ls, rest);
      m.config_text += rest + "\n";
    } else if (tag == "param") {
      Manifest::Entry e;
      int trainable = 1;
      ls >> e.name >> e.group >> trainable >> e.shape;
      e.trainable = trainable != 0;
      m.params.push_back(e);
    } else if (!tag.empty()) {
      throw IoError(where + ": unknown manifest entry '" + tag + "'");
    }
    if (!ls && !ls.eof()) throw IoError(where + ": malformed manifest line '" + line + "'");
  }
  if (!saw_precision) throw IoError(where + ": manifest lacks precision");
  return m;
}

std::string read_manifest_text(std::istream& in, const std::string& where) {
  char magic[4];
  if (!in.read(magic, 4)) throw IoError(where + ": truncated checkpoint");
  if (!std::equal(magic, magic + 4, kMagic)) throw IoError(where + ": not a checkpoint (bad magic)");
  const auto version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw IoError(where + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto length = read_u64(in);
  if (length > (std::uint64_t{1} << 26)) throw IoError(where + ": implausible manifest length");
  std::string text(static_cast<std::size_t>(length), '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw IoError(where + ": truncated manifest");
  return text;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config, const ModelState<T>& state,
                     const OptimizerState<T>& opt) {
  if (opt.velocity.size() != state.params.size()) throw Error("save_checkpoint: optimizer does not match the model");
  std::ostringstream manifest;
  manifest << "precision " << (std::is_same_v<T, float> ? "f32" : "f64") << '\n';
  manifest << "step " << state.step << '\n';
  manifest << "opt.t " << opt.t << '\n';
  manifest << "opt.total " << opt.total << '\n';
  TrainConfig cfg = config;
  cfg.model = state.config;
  for (const auto& [k, v] : config_entries(cfg)) manifest << "config " << k << " = " << v << '\n';
  for (const auto& p : state.params) {
    manifest << "param " << p.name << ' ' << group_name(p.group) << ' ' << (p.trainable ? 1 : 0) << ' '
             << shape_field(p.value.shape()) << '\n';
  }
  const std::string text = manifest.str();

  std::ostringstream blob(std::ios::binary);
  blob.write(kMagic, 4);
  write_u32(blob, kCheckpointVersion);
  write_u64(blob, text.size());
  blob.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : state.params) write_tensor(blob, p.value);
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    write_tensor(blob, Tensor<T>(state.params[i].value.shape(), opt.velocity[i]));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string bytes = blob.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + where);
  const auto manifest = parse_manifest(read_manifest_text(in, where), where);
  const Precision want = std::is_same_v<T, float> ? Precision::kF32 : Precision::kF64;
  if (manifest.precision != want) {
    throw IoError(where + ": checkpoint precision is " + precision_name(manifest.precision) + ", expected " +
                  precision_name(want));
  }

  Checkpoint<T> ck;
  ck.config = parse_config(manifest.config_text);
  ck.state = build_model<T>(ck.config.model, ck.config.seed);
  ck.state.step = manifest.step;
  if (manifest.params.size() != ck.state.params.size()) {
    throw IoError(where + ": checkpoint has " + std::to_string(manifest.params.size()) + " parameters, config implies " +
                  std::to_string(ck.state.params.size()));
  }
  for (std::size_t i = 0; i < manifest.params.size(); ++i) {
    auto& p = ck.state.params[i];
    const auto& e = manifest.params[i];
    if (e.name != p.name || e.group != group_name(p.group) || e.shape != shape_field(p.value.shape())) {
      throw IoError(where + ": parameter " + std::to_string(i) + " is '" + e.name + "' " + e.shape + ", expected '" +
                    p.name + "' " + shape_field(p.value.shape()));
    }
    p.trainable = e.trainable;
  }
  try {
    for (auto& p : ck.state.params) {
      auto t = read_tensor<T>(in);
      if (t.shape() != p.value.shape()) throw IoError("parameter '" + p.name + "' shape mismatch");
      p.value = t;
    }
    ck.opt.t = manifest.t;
    ck.opt.total = manifest.total;
    for (const auto& p : ck.state.params) {
      auto t = read_tensor<T>(in);
      if (t.shape() != p.value.shape()) throw IoError("velocity of '" + p.name + "' shape mismatch");
      ck.opt.velocity.emplace_back(t.values().begin(), t.values().end());
    }
  } catch (const IoError& e) {
    throw IoError(where + ": " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(where + ": trailing bytes after checkpoint");
  if (ck.opt.t < 0 || ck.opt.t > ck.opt.total) throw IoError(where + ": inconsistent optimizer counters");
  return ck;
}

Precision checkpoint_precision(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return parse_manifest(read_manifest_text(in, path.string()), path.string()).precision;
}

template void save_checkpoint(const std::filesystem::path&, const TrainConfig&, const ModelState<float>&,
                              const OptimizerState<float>&);
template void save_checkpoint(const std::filesystem::path&, const TrainConfig&, const ModelState<double>&,
                              const OptimizerState<double>&);
template Checkpoint<float> load_checkpoint(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint(const std::filesystem::path&);

}  // namespace ovenet
