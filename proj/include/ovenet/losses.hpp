#pragma once

#include <cstdint>
#include <vector>

#include "ovenet/head.hpp"
#include "ovenet/label_map.hpp"
#include "ovenet/tensor.hpp"

namespace ovenet {

struct LossConfig {
  double kappa = 0.5;   // weight on the seed-based term
  double lambda = 0.5;  // weight on the initial term
  bool ohem_enabled = true;
  double ohem_threshold = 0.7;
  double ohem_min_kept_fraction = 0.0625;
  /// When false, hard-example mining is applied to the fused term only.
  bool ohem_all_terms = true;
  std::int32_t ignore_id = kIgnoreId;
  NumericMode numeric_mode = NumericMode::kClamped;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Mean over non-ignored pixels of -log softmax(logits)[target].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const LabelMap& target, std::int32_t ignore_id = kIgnoreId);

/// Pixels kept by hard-example mining, as a 0/1 mask over (B,H,W): every
/// valid pixel whose true-class probability is below the threshold, or, if
/// fewer than ceil(min_kept_fraction * valid) qualify, that many pixels with
/// the lowest true-class probability (ties broken by pixel index).
template <typename T>
std::vector<std::uint8_t> ohem_select(const Tensor<T>& logits, const LabelMap& target, const LossConfig& cfg);

/// Cross-entropy averaged over the pixels chosen by ohem_select.
template <typename T>
Tensor<T> ohem_cross_entropy(const Tensor<T>& logits, const LabelMap& target, const LossConfig& cfg);

/// L(fused) + kappa * L(seed) + lambda * L(initial).
template <typename T>
Tensor<T> semantic_loss(const Tensor<T>& fused_logits, const Tensor<T>& seed_logits, const Tensor<T>& initial_logits,
                        const LabelMap& target, const LossConfig& cfg);

/// Binary cross-entropy of the confidence map against "the seed pixel has the
/// same ground-truth class", with the seed label read by nearest-neighbour
/// rounding of p + o(p). Pixels whose own or seed label is ignored do not
/// contribute. Returns the mean over contributing pixels (zero if none).
/// Offsets receive no gradient.
template <typename T>
Tensor<T> confidence_loss(const Tensor<T>& confidence, const Tensor<T>& offsets, const LabelMap& target,
                          std::int32_t ignore_id = kIgnoreId, OffsetScale scale = OffsetScale::kPerAxis,
                          NumericMode mode = NumericMode::kClamped);

template <typename T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> semantic;
  Tensor<T> confidence;
};

/// Semantic loss plus confidence loss, the latter evaluated with the same
/// offsets that produced the seed and fused logits.
template <typename T>
LossTerms<T> total_loss(const Tensor<T>& fused_logits, const Tensor<T>& seed_logits, const Tensor<T>& initial_logits,
                        const Tensor<T>& confidence, const Tensor<T>& offsets, const LabelMap& target,
                        const LossConfig& cfg, OffsetScale scale = OffsetScale::kPerAxis);

}  // namespace ovenet
