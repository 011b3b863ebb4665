#pragma once

#include <cstdint>
#include <vector>

#include "ovenet/tensor.hpp"

namespace ovenet {

inline constexpr std::int32_t kIgnoreId = 255;

/// Per-pixel class ids for `batch` images of height x width, stored
/// row-major as (batch, height, width).
struct LabelMap {
  std::int64_t batch = 1;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::int32_t> ids;

  LabelMap() = default;
  LabelMap(std::int64_t h, std::int64_t w, std::int32_t fill = 0) : LabelMap(1, h, w, fill) {}
  LabelMap(std::int64_t b, std::int64_t h, std::int64_t w, std::int32_t fill)
      : batch(b), height(h), width(w), ids(static_cast<std::size_t>(b * h * w), fill) {}

  std::int64_t pixels() const { return batch * height * width; }
  std::int32_t& at(std::int64_t b, std::int64_t y, std::int64_t x) { return ids[(b * height + y) * width + x]; }
  std::int32_t at(std::int64_t b, std::int64_t y, std::int64_t x) const {
    return ids[(b * height + y) * width + x];
  }
  /// Single-image accessors.
  std::int32_t& at(std::int64_t y, std::int64_t x) { return at(0, y, x); }
  std::int32_t at(std::int64_t y, std::int64_t x) const { return at(0, y, x); }

  bool operator==(const LabelMap&) const = default;
};

/// Stacks single-image maps of equal size into one batch.
LabelMap stack_labels(const std::vector<const LabelMap*>& maps);

/// Throws ShapeError unless `labels` is (B,H,W) matching `shape` (B,*,H,W).
void require_label_shape(const char* op, const LabelMap& labels, const Shape& shape);

}  // namespace ovenet
