#pragma once
// Brute-force scalar reference implementations. They are deliberately
// naive: explicit loops over (b, k, y, x), no shared helpers with the
// library beyond plain containers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace ovenet::oracle {

struct Dims {
  std::int64_t b, k, h, w;
  std::int64_t at(std::int64_t bi, std::int64_t ki, std::int64_t y, std::int64_t x) const {
    return ((bi * k + ki) * h + y) * w + x;
  }
};

inline double true_class_probability(const std::vector<double>& logits, const Dims& d, std::int64_t b, std::int64_t y,
                                     std::int64_t x, int cls) {
  double den = 0.0;
  for (std::int64_t k = 0; k < d.k; ++k) den += std::exp(logits[d.at(b, k, y, x)]);
  return std::exp(logits[d.at(b, cls, y, x)]) / den;
}

inline double neg_log_prob(const std::vector<double>& logits, const Dims& d, std::int64_t b, std::int64_t y,
                           std::int64_t x, int cls) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::int64_t k = 0; k < d.k; ++k) m = std::max(m, logits[d.at(b, k, y, x)]);
  double s = 0.0;
  for (std::int64_t k = 0; k < d.k; ++k) s += std::exp(logits[d.at(b, k, y, x)] - m);
  return -(logits[d.at(b, cls, y, x)] - m - std::log(s));
}

inline double cross_entropy(const std::vector<double>& logits, const Dims& d, const std::vector<int>& labels,
                            int ignore) {
  double total = 0.0;
  int n = 0;
  for (std::int64_t b = 0; b < d.b; ++b)
    for (std::int64_t y = 0; y < d.h; ++y)
      for (std::int64_t x = 0; x < d.w; ++x) {
        const int t = labels[(b * d.h + y) * d.w + x];
        if (t == ignore) continue;
        total += neg_log_prob(logits, d, b, y, x, t);
        ++n;
      }
  return total / n;
}

inline std::vector<std::uint8_t> ohem_kept(const std::vector<double>& logits, const Dims& d,
                                           const std::vector<int>& labels, int ignore, double threshold,
                                           double min_fraction) {
  const std::int64_t n = d.b * d.h * d.w;
  std::vector<double> prob(static_cast<std::size_t>(n), 2.0);
  std::int64_t valid = 0, below = 0;
  for (std::int64_t b = 0; b < d.b; ++b)
    for (std::int64_t y = 0; y < d.h; ++y)
      for (std::int64_t x = 0; x < d.w; ++x) {
        const auto i = (b * d.h + y) * d.w + x;
        if (labels[i] == ignore) continue;
        prob[i] = true_class_probability(logits, d, b, y, x, labels[i]);
        ++valid;
        if (prob[i] < threshold) ++below;
      }
  const auto need = static_cast<std::int64_t>(std::ceil(min_fraction * static_cast<double>(valid)));
  std::vector<std::uint8_t> kept(static_cast<std::size_t>(n), 0);
  if (below >= need) {
    for (std::int64_t i = 0; i < n; ++i) kept[i] = labels[i] != ignore && prob[i] < threshold;
    return kept;
  }
  // Repeatedly pick the smallest remaining probability, lowest index first.
  for (std::int64_t round = 0; round < need; ++round) {
    std::int64_t best = -1;
    for (std::int64_t i = 0; i < n; ++i) {
      if (labels[i] == ignore || kept[i]) continue;
      if (best < 0 || prob[i] < prob[best]) best = i;
    }
    kept[best] = 1;
  }
  return kept;
}

inline double masked_cross_entropy(const std::vector<double>& logits, const Dims& d, const std::vector<int>& labels,
                                   const std::vector<std::uint8_t>& kept) {
  double total = 0.0;
  int n = 0;
  for (std::int64_t b = 0; b < d.b; ++b)
    for (std::int64_t y = 0; y < d.h; ++y)
      for (std::int64_t x = 0; x < d.w; ++x) {
        const auto i = (b * d.h + y) * d.w + x;
        if (!kept[i]) continue;
        total += neg_log_prob(logits, d, b, y, x, labels[i]);
        ++n;
      }
  return total / n;
}

/// offsets are normalized (B,2,H,W); displacement in pixels is o_u * W, o_v * H.
inline double confidence_loss(const std::vector<double>& conf, const std::vector<double>& offsets, std::int64_t batch,
                              std::int64_t h, std::int64_t w, const std::vector<int>& labels, int ignore) {
  double total = 0.0;
  int n = 0;
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x) {
        const int own = labels[(b * h + y) * w + x];
        if (own == ignore) continue;
        const double ou = offsets[((b * 2 + 0) * h + y) * w + x] * static_cast<double>(w);
        const double ov = offsets[((b * 2 + 1) * h + y) * w + x] * static_cast<double>(h);
        // Nearest pixel to (x + ou, y + ov), halves rounding up, kept inside the image.
        std::int64_t sx = static_cast<std::int64_t>(std::floor(static_cast<double>(x) + ou + 0.5));
        std::int64_t sy = static_cast<std::int64_t>(std::floor(static_cast<double>(y) + ov + 0.5));
        sx = sx < 0 ? 0 : (sx > w - 1 ? w - 1 : sx);
        sy = sy < 0 ? 0 : (sy > h - 1 ? h - 1 : sy);
        const int seed = labels[(b * h + sy) * w + sx];
        if (seed == ignore) continue;
        const double f = conf[(b * h + y) * w + x];
        total += seed == own ? -std::log(f) : -std::log(1.0 - f);
        ++n;
      }
  return n == 0 ? 0.0 : total / n;
}

struct IouResult {
  std::vector<double> iou;       // NaN where undefined
  double miou = 0.0;
};

/// Set-based IoU: |pred=c and gt=c| / |pred=c or gt=c| over non-ignored pixels.
inline IouResult iou(const std::vector<int>& pred, const std::vector<int>& gt, int k, int ignore) {
  IouResult r;
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < k; ++c) {
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == ignore) continue;
      const bool a = pred[i] == c, b = gt[i] == c;
      inter += a && b;
      uni += a || b;
    }
    if (uni == 0) {
      r.iou.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      r.iou.push_back(static_cast<double>(inter) / static_cast<double>(uni));
      sum += r.iou.back();
      ++defined;
    }
  }
  r.miou = defined ? sum / defined : 0.0;
  return r;
}

/// Bilinear value of one channel plane at (u, v), clamped to the border.
inline double bilinear(const double* plane, std::int64_t h, std::int64_t w, double u, double v) {
  u = std::min(std::max(u, 0.0), static_cast<double>(w - 1));
  v = std::min(std::max(v, 0.0), static_cast<double>(h - 1));
  const auto x0 = static_cast<std::int64_t>(std::floor(u));
  const auto y0 = static_cast<std::int64_t>(std::floor(v));
  const auto x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double ax = u - x0, ay = v - y0;
  return plane[y0 * w + x0] * (1 - ax) * (1 - ay) + plane[y0 * w + x1] * ax * (1 - ay) +
         plane[y1 * w + x0] * (1 - ax) * ay + plane[y1 * w + x1] * ax * ay;
}

/// Direct zero-padded cross-correlation.
inline std::vector<double> conv2d(const std::vector<double>& in, std::int64_t b, std::int64_t c, std::int64_t h,
                                  std::int64_t w, const std::vector<double>& weight, std::int64_t oc,
                                  std::int64_t kh, std::int64_t kw, const std::vector<double>& bias, int stride,
                                  int pad, std::int64_t* out_h, std::int64_t* out_w) {
  const std::int64_t oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  *out_h = oh;
  *out_w = ow;
  std::vector<double> out(static_cast<std::size_t>(b * oc * oh * ow), 0.0);
  for (std::int64_t bi = 0; bi < b; ++bi)
    for (std::int64_t o = 0; o < oc; ++o)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
          double s = bias[o];
          for (std::int64_t ci = 0; ci < c; ++ci)
            for (std::int64_t ky = 0; ky < kh; ++ky)
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t iy = y * stride - pad + ky, ix = x * stride - pad + kx;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                s += weight[((o * c + ci) * kh + ky) * kw + kx] * in[((bi * c + ci) * h + iy) * w + ix];
              }
          out[((bi * oc + o) * oh + y) * ow + x] = s;
        }
  return out;
}

/// Half-pixel bilinear resize of one plane (source coordinate
/// (dst + 0.5) * in / out - 0.5, negative values clamped to 0).
inline std::vector<double> resize_plane(const std::vector<double>& plane, std::int64_t h, std::int64_t w,
                                        std::int64_t oh, std::int64_t ow) {
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t x = 0; x < ow; ++x) {
      const double sy = std::max(0.0, (y + 0.5) * static_cast<double>(h) / static_cast<double>(oh) - 0.5);
      const double sx = std::max(0.0, (x + 0.5) * static_cast<double>(w) / static_cast<double>(ow) - 0.5);
      out[y * ow + x] = bilinear(plane.data(), h, w, sx, sy);
    }
  return out;
}

}  // namespace ovenet::oracle
