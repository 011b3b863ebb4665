#include "ovenet/model.hpp"

#include <bit>
#include <cmath>
#include <random>

#include "ovenet/nnops.hpp"
#include "ovenet/ops.hpp"

namespace ovenet {

void ModelConfig::validate() const {
  if (in_channels < 1) throw ConfigError("model: in_channels must be >= 1");
  if (trunk_blocks < 1) throw ConfigError("model: trunk_blocks must be >= 1");
  if (branch_at < 1 || branch_at > trunk_blocks) {
    throw ConfigError("model: branch_at must be in [1, trunk_blocks], got " + std::to_string(branch_at));
  }
  if (head_blocks < 0 || offset_head_blocks < 0) throw ConfigError("model: head block counts must be >= 0");
  if (base_width < 4) throw ConfigError("model: base_width must be >= 4");
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (!(tau > 0.0)) throw ConfigError("model: tau must be positive");
  if (head_downscale < 1 || !std::has_single_bit(static_cast<unsigned>(head_downscale))) {
    throw ConfigError("model: head_downscale must be a power of two");
  }
  if (std::countr_zero(static_cast<unsigned>(head_downscale)) > trunk_blocks) {
    throw ConfigError("model: head_downscale needs more stride-2 blocks than the trunk has");
  }
}

std::string group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::kTrunk:
      return "trunk";
    case ParamGroup::kSemantic:
      return "semantic";
    case ParamGroup::kOffset:
      return "offset";
  }
  return "?";
}

template <typename T>
const Parameter<T>& ModelState<T>::param(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw Error("model: no parameter named '" + name + "'");
}

template <typename T>
std::int64_t ModelState<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

template <typename T>
std::int64_t ModelState<T>::trainable_parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : params) {
    if (p.trainable) n += p.value.numel();
  }
  return n;
}

namespace {

std::int64_t conv_params(std::int64_t in, std::int64_t out) { return out * in * 9 + out; }

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t name_key(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct ConvSpec {
  std::string prefix;
  ParamGroup group;
  int in, out;
  bool relu_follows;
};

std::vector<ConvSpec> layer_plan(const ModelConfig& c) {
  std::vector<ConvSpec> plan;
  for (int i = 0; i < c.trunk_blocks; ++i) {
    plan.push_back({"trunk." + std::to_string(i), ParamGroup::kTrunk, i == 0 ? c.in_channels : c.base_width,
                    c.base_width, true});
  }
  for (int i = 0; i < c.head_blocks; ++i) {
    plan.push_back({"semantic." + std::to_string(i), ParamGroup::kSemantic, c.base_width, c.base_width, true});
  }
  plan.push_back({"semantic.out", ParamGroup::kSemantic, c.base_width, c.num_classes, false});
  if (c.two_head_enabled) {
    for (int i = 0; i < c.offset_head_blocks; ++i) {
      plan.push_back({"offset." + std::to_string(i), ParamGroup::kOffset, c.base_width, c.base_width, true});
    }
    plan.push_back({"offset.out", ParamGroup::kOffset, c.base_width, 3, false});
  }
  return plan;
}

template <typename T>
Tensor<T> conv_block(const ModelState<T>& s, const std::string& prefix, const Tensor<T>& x, int stride, bool act) {
  const auto& w = s.param(prefix + ".weight").value;
  const auto& b = s.param(prefix + ".bias").value;
  auto y = conv2d(x, w, b, stride, 1);
  return act ? relu(y) : y;
}

}  // namespace

std::int64_t expected_offset_head_parameter_count(const ModelConfig& c) {
  if (!c.two_head_enabled) return 0;
  return c.offset_head_blocks * conv_params(c.base_width, c.base_width) + conv_params(c.base_width, 3);
}

std::int64_t expected_parameter_count(const ModelConfig& c) {
  std::int64_t n = conv_params(c.in_channels, c.base_width) +
                   (c.trunk_blocks - 1) * conv_params(c.base_width, c.base_width);
  n += c.head_blocks * conv_params(c.base_width, c.base_width) + conv_params(c.base_width, c.num_classes);
  return n + expected_offset_head_parameter_count(c);
}

template <typename T>
ModelState<T> build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelState<T> state;
  state.config = config;
  for (const auto& spec : layer_plan(config)) {
    const std::int64_t fan_in = std::int64_t{spec.in} * 9;
    // He-uniform bound ahead of a relu, unit-gain bound for linear outputs.
    double bound = std::sqrt((spec.relu_follows ? 6.0 : 3.0) / static_cast<double>(fan_in));
    // Near-zero offsets at init: seeds start at their own pixel, S_s ~ S_i.
    if (spec.prefix == "offset.out") bound *= 0.01;
    const std::string wname = spec.prefix + ".weight";
    std::mt19937_64 rng(splitmix(seed ^ name_key(wname)));
    std::vector<T> w(static_cast<std::size_t>(spec.out * fan_in));
    for (auto& v : w) {
      const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = static_cast<T>((2.0 * unit - 1.0) * bound);
    }
    state.params.push_back({wname, spec.group, Tensor<T>(Shape{spec.out, spec.in, 3, 3}, std::move(w)), true});
    state.params.push_back({spec.prefix + ".bias", spec.group, Tensor<T>(Shape{spec.out}, T(0)), true});
  }
  return state;
}

template <typename T>
ForwardOutputs<T> forward(const ModelState<T>& state, const Tensor<T>& images) {
  const ModelConfig& c = state.config;
  if (images.rank() != 4 || images.dim(1) != c.in_channels) {
    throw ShapeError("forward: images must be (B," + std::to_string(c.in_channels) + ",H,W), got " +
                     shape_string(images.shape()));
  }
  const std::int64_t height = images.dim(2), width = images.dim(3);
  if (height % c.head_downscale != 0 || width % c.head_downscale != 0) {
    throw ShapeError("forward: image size " + std::to_string(height) + "x" + std::to_string(width) +
                     " not divisible by head_downscale " + std::to_string(c.head_downscale));
  }
  const int strided = std::countr_zero(static_cast<unsigned>(c.head_downscale));

  Tensor<T> x = images;
  Tensor<T> tap;
  for (int i = 0; i < c.trunk_blocks; ++i) {
    x = conv_block(state, "trunk." + std::to_string(i), x, i < strided ? 2 : 1, true);
    if (i + 1 == c.branch_at) tap = x;
  }
  Tensor<T> sem = x;
  for (int i = 0; i < c.head_blocks; ++i) sem = conv_block(state, "semantic." + std::to_string(i), sem, 1, true);
  Tensor<T> logits = conv_block(state, std::string("semantic.out"), sem, 1, false);
  if (c.head_downscale > 1) logits = upsample_bilinear(logits, height, width);

  ForwardOutputs<T> out;
  out.initial_logits = logits;
  if (!c.two_head_enabled) {
    out.seed_logits = logits;
    out.fused_logits = logits;
    return out;
  }

  Tensor<T> off = tap;
  for (int i = 0; i < c.offset_head_blocks; ++i) off = conv_block(state, "offset." + std::to_string(i), off, 1, true);
  Tensor<T> head = conv_block(state, std::string("offset.out"), off, 1, false);
  if (c.head_downscale > 1) head = upsample_bilinear(head, height, width);
  Tensor<T> raw_offsets = slice(head, 1, 0, 2);
  if (c.zero_offsets) raw_offsets = scale(raw_offsets, T(0));
  Tensor<T> raw_confidence = slice(head, 1, 2, 1);

  out.offsets = bound_offsets(raw_offsets, static_cast<T>(c.tau));
  out.confidence = sigmoid(raw_confidence);
  out.seed_logits = seed_resample(logits, *out.offsets, c.offset_scale);
  if (c.fuse_probabilities) {
    auto fused = fuse(softmax_channels(logits), softmax_channels(out.seed_logits), *out.confidence);
    out.fused_logits = log(fused, NumericMode::kClamped);
  } else {
    out.fused_logits = fuse(logits, out.seed_logits, *out.confidence);
  }
  return out;
}

template <typename T>
void freeze_trunk_and_semantic_head(ModelState<T>& state) {
  if (!state.config.two_head_enabled) throw ConfigError("freeze: model has no offset head to train");
  for (auto& p : state.params) {
    if (p.group != ParamGroup::kOffset) p.trainable = false;
  }
}

template struct ModelState<float>;
template struct ModelState<double>;
template ModelState<float> build_model(const ModelConfig&, std::uint64_t);
template ModelState<double> build_model(const ModelConfig&, std::uint64_t);
template ForwardOutputs<float> forward(const ModelState<float>&, const Tensor<float>&);
template ForwardOutputs<double> forward(const ModelState<double>&, const Tensor<double>&);
template void freeze_trunk_and_semantic_head(ModelState<float>&);
template void freeze_trunk_and_semantic_head(ModelState<double>&);

}  // namespace ovenet
