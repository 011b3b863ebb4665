#include "ovenet/metrics.hpp"

#include <cstdio>
#include <iomanip>

#include "ovenet/tensor.hpp"

namespace ovenet {

ConfusionMatrix::ConfusionMatrix(int num_classes, std::int32_t ignore_id)
    : num_classes_(num_classes), ignore_id_(ignore_id) {
  if (num_classes < 1) throw ConfigError("confusion matrix: num_classes must be >= 1");
  counts_.assign(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0);
}

void ConfusionMatrix::accumulate(const LabelMap& prediction, const LabelMap& target) {
  if (prediction.batch != target.batch || prediction.height != target.height || prediction.width != target.width) {
    throw ShapeError("confusion matrix: prediction and target sizes differ");
  }
  for (std::size_t i = 0; i < target.ids.size(); ++i) {
    const auto t = target.ids[i];
    if (t == ignore_id_) continue;
    const auto p = prediction.ids[i];
    if (t < 0 || t >= num_classes_ || p < 0 || p >= num_classes_) {
      throw ShapeError("confusion matrix: class id out of range (target " + std::to_string(t) + ", prediction " +
                       std::to_string(p) + ")");
    }
    ++counts_[t * num_classes_ + p];
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw ShapeError("confusion matrix: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::vector<std::optional<double>> ConfusionMatrix::iou_per_class() const {
  std::vector<std::optional<double>> iou(static_cast<std::size_t>(num_classes_));
  for (int k = 0; k < num_classes_; ++k) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < num_classes_; ++j) {
      row += count(k, j);
      col += count(j, k);
    }
    const std::int64_t tp = count(k, k);
    const std::int64_t denom = row + col - tp;
    if (denom > 0) iou[k] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return iou;
}

double ConfusionMatrix::miou() const {
  double sum = 0.0;
  int defined = 0;
  for (const auto& v : iou_per_class()) {
    if (v) {
      sum += *v;
      ++defined;
    }
  }
  return defined > 0 ? sum / defined : 0.0;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_table(std::ostream& out, const MetricsReport& report) {
  if (report.entries.empty()) return;
  const int k = report.entries.front().second.num_classes();
  out << std::left << std::setw(10) << "pred" << std::right << std::setw(8) << "mIoU";
  for (int c = 0; c < k; ++c) out << std::setw(8) << ("c" + std::to_string(c));
  out << '\n';
  for (const auto& [name, cm] : report.entries) {
    out << std::left << std::setw(10) << name << std::right << std::setw(8) << fixed(100.0 * cm.miou(), 2);
    for (const auto& v : cm.iou_per_class()) out << std::setw(8) << (v ? fixed(100.0 * *v, 2) : std::string("-"));
    out << '\n';
  }
}

void write_metrics_kv(std::ostream& out, const MetricsReport& report) {
  // Headline numbers refer to the fused prediction when there is one.
  for (const auto& [name, cm] : report.entries) {
    if (name != "fused") continue;
    out << "miou=" << exact(cm.miou()) << '\n';
  }
  for (const auto& [name, cm] : report.entries) {
    out << "miou." << name << '=' << exact(cm.miou()) << '\n';
    const auto iou = cm.iou_per_class();
    for (std::size_t c = 0; c < iou.size(); ++c) {
      out << "iou." << name << '.' << c << '=' << (iou[c] ? exact(*iou[c]) : std::string("nan")) << '\n';
    }
  }
}

}  // namespace ovenet
