#pragma once

// Small two-head convolutional network: a shared trunk of conv3x3+relu
// blocks, a semantic head producing K logit channels, and (optionally) an
// offset head producing two offset channels plus one confidence channel,
// tapped from the trunk after block `branch_at`. Both heads run at
// 1/head_downscale resolution and are bilinearly upsampled before the seed
// resampling and fusion, which operate at input resolution.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ovenet/head.hpp"
#include "ovenet/tensor.hpp"

namespace ovenet {

struct ModelConfig {
  int in_channels = 3;
  int trunk_blocks = 4;
  int branch_at = 4;  // 1-based trunk block whose output feeds the offset head
  int head_blocks = 2;
  int offset_head_blocks = 2;
  int base_width = 32;
  int num_classes = 6;
  double tau = 0.5;
  int head_downscale = 2;  // power of two, realized by stride-2 leading trunk blocks
  bool two_head_enabled = true;
  /// Fuse softmax probabilities instead of logits; fused output is then the
  /// log of the fused probabilities.
  bool fuse_probabilities = false;
  OffsetScale offset_scale = OffsetScale::kPerAxis;
  /// Forces raw offsets to zero (degenerate-fusion diagnostics).
  bool zero_offsets = false;

  void validate() const;
};

enum class ParamGroup { kTrunk, kSemantic, kOffset };

template <typename T>
struct Parameter {
  std::string name;
  ParamGroup group;
  Tensor<T> value;
  bool trainable = true;
};

template <typename T>
struct ModelState {
  ModelConfig config;
  std::vector<Parameter<T>> params;
  std::int64_t step = 0;

  const Parameter<T>& param(const std::string& name) const;
  std::int64_t parameter_count() const;
  std::int64_t trainable_parameter_count() const;
};

template <typename T>
struct ForwardOutputs {
  Tensor<T> initial_logits;  // (B,K,H,W)
  Tensor<T> seed_logits;     // equals initial_logits in baseline mode
  Tensor<T> fused_logits;    // equals initial_logits in baseline mode
  std::optional<Tensor<T>> offsets;     // (B,2,H,W), normalized, bounded by tau
  std::optional<Tensor<T>> confidence;  // (B,1,H,W)
};

/// Deterministic in (config, seed). Each parameter draws from its own
/// generator keyed by (seed, name), so shared layers initialize identically
/// across configs that differ only elsewhere.
template <typename T>
ModelState<T> build_model(const ModelConfig& config, std::uint64_t seed);

/// Closed-form number of scalars `build_model` allocates.
std::int64_t expected_parameter_count(const ModelConfig& config);
std::int64_t expected_offset_head_parameter_count(const ModelConfig& config);

/// Images are (B, in_channels, H, W) with H, W divisible by head_downscale.
template <typename T>
ForwardOutputs<T> forward(const ModelState<T>& state, const Tensor<T>& images);

/// Marks trunk and semantic-head parameters non-trainable.
template <typename T>
void freeze_trunk_and_semantic_head(ModelState<T>& state);

std::string group_name(ParamGroup group);

}  // namespace ovenet
