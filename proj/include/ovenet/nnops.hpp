#pragma once

// Neural-network ops on batched feature maps. Every 4-D feature map uses
// (batch, channels, height, width) ordering.

#include <cstdint>

#include "ovenet/tensor.hpp"

namespace ovenet {

/// Cross-correlation with a (out, in, kh, kw) kernel and zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride = 1,
                 int padding = 1);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Softmax across the channel axis independently at every pixel, stabilized
/// by subtracting the per-pixel maximum.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x);

/// Bilinear lookup of `features` (B,K,H,W) at `points` (B,2,Ho,Wo), where
/// points(b,0,.) is the horizontal and points(b,1,.) the vertical coordinate
/// in pixels, with pixel centers at integer coordinates. Coordinates outside
/// [0, W-1] x [0, H-1] are clamped to the border; a clamped coordinate
/// component has zero gradient. Differentiable w.r.t. both arguments.
template <typename T>
Tensor<T> bilinear_grid_sample(const Tensor<T>& features, const Tensor<T>& points);

/// Half-pixel-centered (align_corners = false) bilinear resize to a target
/// size at least as large as the source.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& features, std::int64_t out_height, std::int64_t out_width);

}  // namespace ovenet
