#pragma once

// Offset/confidence head post-processing: bounded offsets, seed-location
// resampling of logits, confidence-weighted fusion, and argmax decoding.

#include "ovenet/label_map.hpp"
#include "ovenet/tensor.hpp"

namespace ovenet {

/// How normalized offsets map to pixels. kPerAxis scales the horizontal
/// component by W and the vertical by H; kMaxExtent scales both by max(H,W).
enum class OffsetScale { kPerAxis, kMaxExtent };

/// tau * tanh(raw), applied per component. Throws ConfigError for tau <= 0.
template <typename T>
Tensor<T> bound_offsets(const Tensor<T>& raw_offsets, T tau);

/// (B,2,H,W) grid whose channel 0 holds column indices and channel 1 rows.
template <typename T>
Tensor<T> identity_grid(std::int64_t batch, std::int64_t height, std::int64_t width);

/// Converts normalized offsets (B,2,H,W) to absolute pixel sample points.
template <typename T>
Tensor<T> seed_points(const Tensor<T>& offsets, OffsetScale scale = OffsetScale::kPerAxis);

/// Logits looked up at p + o(p), bilinearly, for every pixel p.
template <typename T>
Tensor<T> seed_resample(const Tensor<T>& initial_logits, const Tensor<T>& offsets,
                        OffsetScale scale = OffsetScale::kPerAxis);

/// (1 - F) * initial + F * seed per pixel, F (B,1,H,W) shared by all channels.
template <typename T>
Tensor<T> fuse(const Tensor<T>& initial, const Tensor<T>& seed, const Tensor<T>& confidence);

/// Per-pixel argmax over channels; ties resolve to the lowest class id.
template <typename T>
LabelMap predict_classes(const Tensor<T>& logits);

}  // namespace ovenet
