#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ovenet/label_map.hpp"

namespace ovenet {

/// counts(g, p) = number of evaluated pixels with ground truth g predicted
/// as p. Pixels whose target is the ignore id are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes, std::int32_t ignore_id = kIgnoreId);

  void accumulate(const LabelMap& prediction, const LabelMap& target);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  int num_classes() const { return num_classes_; }
  std::int64_t count(int truth, int predicted) const { return counts_[truth * num_classes_ + predicted]; }
  std::int64_t total() const;

  /// IoU per class; nullopt where the class never occurs in either map.
  std::vector<std::optional<double>> iou_per_class() const;
  /// Mean over classes with a defined IoU; 0 when none is defined.
  double miou() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int num_classes_;
  std::int32_t ignore_id_;
  std::vector<std::int64_t> counts_;
};

struct MetricsReport {
  /// One entry per evaluated prediction (e.g. "initial", "seed", "fused").
  std::vector<std::pair<std::string, ConfusionMatrix>> entries;
};

/// Human-readable table: one row per prediction, mIoU then per-class IoU.
void write_metrics_table(std::ostream& out, const MetricsReport& report);
/// `miou=` (fused), then `miou.<name>=...` and `iou.<name>.<class>=...` lines; absent classes are
/// written as `nan`.
void write_metrics_kv(std::ostream& out, const MetricsReport& report);

}  // namespace ovenet
