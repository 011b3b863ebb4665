#include "ovenet/head.hpp"

#include <algorithm>
#include <cmath>

#include "ovenet/nnops.hpp"
#include "ovenet/ops.hpp"

namespace ovenet {

LabelMap stack_labels(const std::vector<const LabelMap*>& maps) {
  if (maps.empty()) return LabelMap{};
  const auto h = maps.front()->height, w = maps.front()->width;
  LabelMap out;
  out.height = h;
  out.width = w;
  out.batch = 0;
  for (const auto* m : maps) {
    if (m->height != h || m->width != w) {
      throw ShapeError("stack_labels: label maps differ in size (" + std::to_string(h) + "x" + std::to_string(w) +
                       " vs " + std::to_string(m->height) + "x" + std::to_string(m->width) + ")");
    }
    out.ids.insert(out.ids.end(), m->ids.begin(), m->ids.end());
    out.batch += m->batch;
  }
  return out;
}

void require_label_shape(const char* op, const LabelMap& labels, const Shape& shape) {
  if (shape.size() != 4 || labels.batch != shape[0] || labels.height != shape[2] || labels.width != shape[3]) {
    throw ShapeError(std::string(op) + ": labels (" + std::to_string(labels.batch) + "," +
                     std::to_string(labels.height) + "," + std::to_string(labels.width) +
                     ") do not match tensor " + shape_string(shape));
  }
}

template <typename T>
Tensor<T> bound_offsets(const Tensor<T>& raw_offsets, T tau) {
  if (!(tau > T(0))) throw ConfigError("bound_offsets: tau must be positive");
  return scale(tanh(raw_offsets), tau);
}

template <typename T>
Tensor<T> identity_grid(std::int64_t batch, std::int64_t height, std::int64_t width) {
  Tensor<T> grid(Shape{batch, 2, height, width});
  auto g = grid.mutable_values();
  const std::int64_t plane = height * width;
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        g[b * 2 * plane + y * width + x] = static_cast<T>(x);
        g[b * 2 * plane + plane + y * width + x] = static_cast<T>(y);
      }
    }
  }
  return grid;
}

template <typename T>
Tensor<T> seed_points(const Tensor<T>& offsets, OffsetScale mode) {
  const Shape& s = offsets.shape();
  if (s.size() != 4 || s[1] != 2) throw ShapeError("seed_points: offsets must be (B,2,H,W), got " + shape_string(s));
  const std::int64_t batch = s[0], height = s[2], width = s[3], plane = height * width;
  const T su = static_cast<T>(mode == OffsetScale::kPerAxis ? width : std::max(height, width));
  const T sv = static_cast<T>(mode == OffsetScale::kPerAxis ? height : std::max(height, width));
  return record<T>(
      "seed_points", {offsets},
      [&] {
        auto ov = offsets.values();
        std::vector<T> out(ov.size());
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t y = 0; y < height; ++y) {
            for (std::int64_t x = 0; x < width; ++x) {
              const auto iu = b * 2 * plane + y * width + x;
              out[iu] = static_cast<T>(x) + ov[iu] * su;
              out[iu + plane] = static_cast<T>(y) + ov[iu + plane] * sv;
            }
          }
        }
        return Tensor<T>(s, std::move(out));
      },
      [batch, plane, su, sv](std::span<const T> g, const std::vector<bool>&) {
        InputGrads<T> grads(1);
        grads[0].resize(g.size());
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t p = 0; p < plane; ++p) {
            grads[0][b * 2 * plane + p] = g[b * 2 * plane + p] * su;
            grads[0][b * 2 * plane + plane + p] = g[b * 2 * plane + plane + p] * sv;
          }
        }
        return grads;
      });
}

template <typename T>
Tensor<T> seed_resample(const Tensor<T>& initial_logits, const Tensor<T>& offsets, OffsetScale scale) {
  const Shape& ls = initial_logits.shape();
  const Shape& os = offsets.shape();
  if (ls.size() != 4 || os.size() != 4 || ls[0] != os[0] || ls[2] != os[2] || ls[3] != os[3]) {
    throw ShapeError("seed_resample: logits " + shape_string(ls) + " and offsets " + shape_string(os) +
                     " disagree");
  }
  return bilinear_grid_sample(initial_logits, seed_points(offsets, scale));
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& initial, const Tensor<T>& seed, const Tensor<T>& confidence) {
  const Shape& s = initial.shape();
  if (s.size() != 4 || seed.shape() != s) {
    throw ShapeError("fuse: initial " + shape_string(s) + " and seed " + shape_string(seed.shape()) + " disagree");
  }
  if (confidence.shape() != Shape{s[0], 1, s[2], s[3]}) {
    throw ShapeError("fuse: confidence " + shape_string(confidence.shape()) + " must be (B,1,H,W) for " +
                     shape_string(s));
  }
  const std::int64_t batch = s[0], channels = s[1], plane = s[2] * s[3];
  return record<T>(
      "fuse", {initial, seed, confidence},
      [&] {
        auto iv = initial.values();
        auto sv = seed.values();
        auto fv = confidence.values();
        std::vector<T> out(iv.size());
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t k = 0; k < channels; ++k) {
            for (std::int64_t p = 0; p < plane; ++p) {
              const auto i = (b * channels + k) * plane + p;
              const T f = fv[b * plane + p];
              out[i] = (T(1) - f) * iv[i] + f * sv[i];
            }
          }
        }
        return Tensor<T>(s, std::move(out));
      },
      [initial, seed, confidence, batch, channels, plane](std::span<const T> g, const std::vector<bool>& needs) {
        auto iv = initial.values();
        auto sv = seed.values();
        auto fv = confidence.values();
        InputGrads<T> grads(3);
        if (needs[0]) grads[0].resize(iv.size());
        if (needs[1]) grads[1].resize(sv.size());
        if (needs[2]) grads[2].assign(fv.size(), T(0));
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t k = 0; k < channels; ++k) {
            for (std::int64_t p = 0; p < plane; ++p) {
              const auto i = (b * channels + k) * plane + p;
              const T f = fv[b * plane + p];
              if (needs[0]) grads[0][i] = g[i] * (T(1) - f);
              if (needs[1]) grads[1][i] = g[i] * f;
              if (needs[2]) grads[2][b * plane + p] += g[i] * (sv[i] - iv[i]);
            }
          }
        }
        return grads;
      });
}

template <typename T>
LabelMap predict_classes(const Tensor<T>& logits) {
  const Shape& s = logits.shape();
  if (s.size() != 4 || s[1] < 1) throw ShapeError("predict_classes: logits must be (B,K,H,W), got " + shape_string(s));
  const std::int64_t batch = s[0], channels = s[1], plane = s[2] * s[3];
  LabelMap out(batch, s[2], s[3], 0);
  auto v = logits.values();
  for (std::int64_t b = 0; b < batch; ++b) {
    const T* base = v.data() + b * channels * plane;
    for (std::int64_t p = 0; p < plane; ++p) {
      std::int32_t best = 0;
      for (std::int64_t k = 1; k < channels; ++k) {
        if (base[k * plane + p] > base[best * plane + p]) best = static_cast<std::int32_t>(k);
      }
      out.ids[b * plane + p] = best;
    }
  }
  return out;
}

#define OVENET_INSTANTIATE_HEAD(T)                                                         \
  template Tensor<T> bound_offsets(const Tensor<T>&, T);                                   \
  template Tensor<T> identity_grid(std::int64_t, std::int64_t, std::int64_t);              \
  template Tensor<T> seed_points(const Tensor<T>&, OffsetScale);                           \
  template Tensor<T> seed_resample(const Tensor<T>&, const Tensor<T>&, OffsetScale);       \
  template Tensor<T> fuse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template LabelMap predict_classes(const Tensor<T>&);

OVENET_INSTANTIATE_HEAD(float)
OVENET_INSTANTIATE_HEAD(double)

}  // namespace ovenet
