#pragma once
// End-to-end gradient check of the total training loss w.r.t. every model
// parameter, on a tiny two-head model at 64-bit precision.

#include <random>

#include "gradcheck.hpp"
#include "ovenet/losses.hpp"
#include "ovenet/model.hpp"

namespace ovenet::testing {

inline ModelConfig gradcheck_model_config() {
  ModelConfig c;
  c.base_width = 4;
  c.trunk_blocks = 2;
  c.branch_at = 1;
  c.head_blocks = 1;
  c.offset_head_blocks = 1;
  c.num_classes = 3;
  c.tau = 0.2;
  return c;
}

inline GradCheckResult model_gradcheck(std::uint64_t seed, bool two_head = true) {
  auto cfg = gradcheck_model_config();
  cfg.two_head_enabled = two_head;
  auto state = build_model<double>(cfg, seed);
  // Non-zero biases so no relu sits exactly at its kink.
  std::mt19937_64 rng(seed + 100);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& p : state.params) {
    if (p.name.ends_with(".bias")) {
      for (auto& v : p.value.mutable_values()) v = u(rng);
    }
  }
  const auto images = random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
  LabelMap labels(2, 8, 8, 0);
  std::uniform_int_distribution<int> cls(0, 2);
  for (std::int64_t b = 0; b < 2; ++b)
    for (std::int64_t y = 0; y < 8; ++y)
      for (std::int64_t x = 0; x < 8; ++x) labels.at(b, y, x) = x < 3 + b ? 0 : (y < 4 ? 1 : 2);
  labels.at(0, 0, 0) = kIgnoreId;
  LossConfig loss;
  loss.ohem_threshold = 0.9;

  std::vector<Tensor<double>> inputs;
  for (const auto& p : state.params) inputs.push_back(p.value);
  auto f = [state, images, labels, loss](const std::vector<Tensor<double>>& in) {
    auto s = state;
    for (std::size_t i = 0; i < in.size(); ++i) s.params[i].value = in[i];
    const auto out = forward(s, images);
    if (!s.config.two_head_enabled) return ohem_cross_entropy(out.initial_logits, labels, loss);
    return total_loss(out.fused_logits, out.seed_logits, out.initial_logits, *out.confidence, *out.offsets, labels,
                      loss, s.config.offset_scale)
        .total;
  };
  return gradcheck(f, inputs);
}

}  // namespace ovenet::testing
