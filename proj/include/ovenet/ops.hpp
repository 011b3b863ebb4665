#pragma once

// Differentiable array ops on Tensor. Binary ops require identical shapes,
// except that either operand may be a single-element tensor, which is
// broadcast as a scalar.

#include <cstdint>
#include <vector>

#include "ovenet/tensor.hpp"

namespace ovenet {

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b, NumericMode mode = NumericMode::kStrict);

template <typename T>
Tensor<T> neg(const Tensor<T>& a);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset);
template <typename T>
Tensor<T> exp(const Tensor<T>& a);
template <typename T>
Tensor<T> log(const Tensor<T>& a, NumericMode mode = NumericMode::kStrict);
template <typename T>
Tensor<T> tanh(const Tensor<T>& a);

/// Sum over all elements; rank-0 result.
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);
/// Maximum along one axis; the axis is removed. Gradient goes to the first
/// maximal element.
template <typename T>
Tensor<T> max_over_axis(const Tensor<T>& a, std::size_t axis);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);
/// Elements [start, start + length) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::int64_t start, std::int64_t length);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

}  // namespace ovenet
