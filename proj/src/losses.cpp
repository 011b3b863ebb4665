#include "ovenet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ovenet/ops.hpp"

namespace ovenet {

void LossConfig::validate() const {
  if (!(kappa >= 0.0) || !(lambda >= 0.0)) throw ConfigError("loss: kappa and lambda must be >= 0");
  if (!(ohem_threshold > 0.0 && ohem_threshold <= 1.0)) throw ConfigError("loss: ohem_threshold must be in (0,1]");
  if (!(ohem_min_kept_fraction > 0.0 && ohem_min_kept_fraction <= 1.0)) {
    throw ConfigError("loss: ohem_min_kept_fraction must be in (0,1]");
  }
}

namespace {

// Per-pixel log-softmax of the target class plus the softmax itself, for
// valid pixels only.
template <typename T>
struct PixelSoftmax {
  std::vector<T> probs;          // (B,K,H,W)
  std::vector<T> target_logp;    // (B,H,W); 0 where ignored
  std::vector<std::uint8_t> valid;
  std::int64_t valid_count = 0;
};

template <typename T>
PixelSoftmax<T> pixel_softmax(const char* op, const Tensor<T>& logits, const LabelMap& target,
                              std::int32_t ignore_id) {
  const Shape& s = logits.shape();
  if (s.size() != 4) throw ShapeError(std::string(op) + ": logits must be (B,K,H,W), got " + shape_string(s));
  require_label_shape(op, target, s);
  const std::int64_t batch = s[0], channels = s[1], plane = s[2] * s[3];
  PixelSoftmax<T> r;
  r.probs.resize(logits.values().size());
  r.target_logp.assign(static_cast<std::size_t>(batch * plane), T(0));
  r.valid.assign(r.target_logp.size(), 0);
  auto v = logits.values();
  for (std::int64_t b = 0; b < batch; ++b) {
    const T* src = v.data() + b * channels * plane;
    T* dst = r.probs.data() + b * channels * plane;
    for (std::int64_t p = 0; p < plane; ++p) {
      const std::int32_t t = target.ids[b * plane + p];
      if (t != ignore_id && (t < 0 || t >= channels)) {
        throw ShapeError(std::string(op) + ": target id " + std::to_string(t) + " out of range for " +
                         std::to_string(channels) + " classes");
      }
      T m = src[p];
      for (std::int64_t k = 1; k < channels; ++k) m = std::max(m, src[k * plane + p]);
      T total = 0;
      for (std::int64_t k = 0; k < channels; ++k) {
        const T e = std::exp(src[k * plane + p] - m);
        dst[k * plane + p] = e;
        total += e;
      }
      const T inv = T(1) / total;
      for (std::int64_t k = 0; k < channels; ++k) dst[k * plane + p] *= inv;
      if (t != ignore_id) {
        r.valid[b * plane + p] = 1;
        ++r.valid_count;
        r.target_logp[b * plane + p] = src[t * plane + p] - m - std::log(total);
      }
    }
  }
  return r;
}

// Mean CE over pixels with mask != 0.
template <typename T>
Tensor<T> masked_cross_entropy(const char* op, const Tensor<T>& logits, const LabelMap& target,
                               const PixelSoftmax<T>& sm, const std::vector<std::uint8_t>& mask) {
  std::int64_t kept = 0;
  T total = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      ++kept;
      total -= sm.target_logp[i];
    }
  }
  if (kept == 0) throw Error(std::string(op) + ": all pixels ignored");
  const T inv = T(1) / static_cast<T>(kept);
  const Shape s = logits.shape();
  return record<T>(
      op, {logits}, [&] { return Tensor<T>::scalar(total * inv); },
      [probs = sm.probs, mask, ids = target.ids, s, inv](std::span<const T> g, const std::vector<bool>&) {
        const std::int64_t batch = s[0], channels = s[1], plane = s[2] * s[3];
        InputGrads<T> grads(1);
        grads[0].assign(probs.size(), T(0));
        const T scale = g[0] * inv;
        for (std::int64_t b = 0; b < batch; ++b) {
          for (std::int64_t p = 0; p < plane; ++p) {
            if (!mask[b * plane + p]) continue;
            const auto t = ids[b * plane + p];
            for (std::int64_t k = 0; k < channels; ++k) {
              const auto i = (b * channels + k) * plane + p;
              grads[0][i] = scale * (probs[i] - (k == t ? T(1) : T(0)));
            }
          }
        }
        return grads;
      });
}

template <typename T>
std::vector<std::uint8_t> select_hard(const Tensor<T>& logits, const LabelMap& target, const PixelSoftmax<T>& sm,
                                      const LossConfig& cfg) {
  const Shape& s = logits.shape();
  const std::int64_t channels = s[1], plane = s[2] * s[3];
  std::vector<std::uint8_t> keep(sm.valid.size(), 0);
  std::vector<std::pair<T, std::int64_t>> candidates;
  candidates.reserve(static_cast<std::size_t>(sm.valid_count));
  std::int64_t qualifying = 0;
  for (std::size_t i = 0; i < sm.valid.size(); ++i) {
    if (!sm.valid[i]) continue;
    const auto b = static_cast<std::int64_t>(i) / plane, p = static_cast<std::int64_t>(i) % plane;
    const T prob = sm.probs[(b * channels + target.ids[i]) * plane + p];
    candidates.emplace_back(prob, static_cast<std::int64_t>(i));
    if (static_cast<double>(prob) < cfg.ohem_threshold) {
      keep[i] = 1;
      ++qualifying;
    }
  }
  const auto min_kept = static_cast<std::int64_t>(
      std::ceil(cfg.ohem_min_kept_fraction * static_cast<double>(sm.valid_count) - 1e-9));
  if (qualifying < min_kept) {
    std::sort(candidates.begin(), candidates.end());
    std::fill(keep.begin(), keep.end(), 0);
    for (std::int64_t j = 0; j < min_kept; ++j) keep[static_cast<std::size_t>(candidates[j].second)] = 1;
  }
  return keep;
}

}  // namespace

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const LabelMap& target, std::int32_t ignore_id) {
  const auto sm = pixel_softmax("cross_entropy", logits, target, ignore_id);
  return masked_cross_entropy("cross_entropy", logits, target, sm, sm.valid);
}

template <typename T>
std::vector<std::uint8_t> ohem_select(const Tensor<T>& logits, const LabelMap& target, const LossConfig& cfg) {
  const auto sm = pixel_softmax("ohem_select", logits, target, cfg.ignore_id);
  return select_hard(logits, target, sm, cfg);
}

template <typename T>
Tensor<T> ohem_cross_entropy(const Tensor<T>& logits, const LabelMap& target, const LossConfig& cfg) {
  cfg.validate();
  const auto sm = pixel_softmax("ohem_cross_entropy", logits, target, cfg.ignore_id);
  if (sm.valid_count == 0) throw Error("ohem_cross_entropy: all pixels ignored");
  return masked_cross_entropy("ohem_cross_entropy", logits, target, sm, select_hard(logits, target, sm, cfg));
}

template <typename T>
Tensor<T> semantic_loss(const Tensor<T>& fused_logits, const Tensor<T>& seed_logits, const Tensor<T>& initial_logits,
                        const LabelMap& target, const LossConfig& cfg) {
  cfg.validate();
  if (seed_logits.shape() != fused_logits.shape() || initial_logits.shape() != fused_logits.shape()) {
    throw ShapeError("semantic_loss: logit maps disagree in shape");
  }
  auto term = [&](const Tensor<T>& logits, bool mined) {
    return mined ? ohem_cross_entropy(logits, target, cfg) : cross_entropy(logits, target, cfg.ignore_id);
  };
  const bool side_mined = cfg.ohem_enabled && cfg.ohem_all_terms;
  Tensor<T> loss = term(fused_logits, cfg.ohem_enabled);
  if (cfg.kappa != 0.0) loss = add(loss, scale(term(seed_logits, side_mined), static_cast<T>(cfg.kappa)));
  if (cfg.lambda != 0.0) loss = add(loss, scale(term(initial_logits, side_mined), static_cast<T>(cfg.lambda)));
  return loss;
}

template <typename T>
Tensor<T> confidence_loss(const Tensor<T>& confidence, const Tensor<T>& offsets, const LabelMap& target,
                          std::int32_t ignore_id, OffsetScale mode, NumericMode numeric) {
  const Shape& cs = confidence.shape();
  const Shape& os = offsets.shape();
  if (cs.size() != 4 || cs[1] != 1 || os.size() != 4 || os[1] != 2 || cs[0] != os[0] || cs[2] != os[2] ||
      cs[3] != os[3]) {
    throw ShapeError("confidence_loss: confidence " + shape_string(cs) + " and offsets " + shape_string(os) +
                     " must be (B,1,H,W) and (B,2,H,W)");
  }
  require_label_shape("confidence_loss", target, cs);
  const std::int64_t batch = cs[0], height = cs[2], width = cs[3], plane = height * width;
  const double su = mode == OffsetScale::kPerAxis ? static_cast<double>(width) : std::max(height, width);
  const double sv = mode == OffsetScale::kPerAxis ? static_cast<double>(height) : std::max(height, width);
  const T eps = static_cast<T>(kClampEpsilon);

  // +1: same class as the seed, -1: different class, 0: not contributing.
  std::vector<std::int8_t> agree(static_cast<std::size_t>(batch * plane), 0);
  std::int64_t contributing = 0;
  auto fv = confidence.values();
  auto ov = offsets.values();
  T total = 0;
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        const auto i = b * plane + y * width + x;
        const auto own = target.ids[i];
        if (own == ignore_id) continue;
        const double u = static_cast<double>(x) + static_cast<double>(ov[b * 2 * plane + y * width + x]) * su;
        const double v = static_cast<double>(y) + static_cast<double>(ov[b * 2 * plane + plane + y * width + x]) * sv;
        const auto sx = std::clamp(static_cast<std::int64_t>(std::floor(u + 0.5)), std::int64_t{0}, width - 1);
        const auto sy = std::clamp(static_cast<std::int64_t>(std::floor(v + 0.5)), std::int64_t{0}, height - 1);
        const auto seed = target.ids[b * plane + sy * width + sx];
        if (seed == ignore_id) continue;
        const T f = fv[i];
        if (numeric == NumericMode::kStrict && !(f > T(0) && f < T(1))) {
          throw NumericError("confidence_loss: confidence outside (0,1)");
        }
        ++contributing;
        if (seed == own) {
          agree[i] = 1;
          total -= std::log(std::max(f, eps));
        } else {
          agree[i] = -1;
          total -= std::log(std::max(T(1) - f, eps));
        }
      }
    }
  }
  const T inv = contributing > 0 ? T(1) / static_cast<T>(contributing) : T(0);
  return record<T>(
      "confidence_loss", {confidence, offsets}, [&] { return Tensor<T>::scalar(total * inv); },
      [confidence, agree, inv, eps](std::span<const T> g, const std::vector<bool>& needs) {
        InputGrads<T> grads(2);
        if (needs[0]) {
          auto fv = confidence.values();
          grads[0].assign(fv.size(), T(0));
          for (std::size_t i = 0; i < agree.size(); ++i) {
            const T f = fv[i];
            if (agree[i] > 0 && f >= eps) grads[0][i] = -g[0] * inv / f;
            if (agree[i] < 0 && T(1) - f >= eps) grads[0][i] = g[0] * inv / (T(1) - f);
          }
        }
        return grads;
      });
}

template <typename T>
LossTerms<T> total_loss(const Tensor<T>& fused_logits, const Tensor<T>& seed_logits, const Tensor<T>& initial_logits,
                        const Tensor<T>& confidence, const Tensor<T>& offsets, const LabelMap& target,
                        const LossConfig& cfg, OffsetScale scale) {
  LossTerms<T> terms;
  terms.semantic = semantic_loss(fused_logits, seed_logits, initial_logits, target, cfg);
  terms.confidence = confidence_loss(confidence, offsets, target, cfg.ignore_id, scale, cfg.numeric_mode);
  terms.total = add(terms.semantic, terms.confidence);
  return terms;
}

#define OVENET_INSTANTIATE_LOSSES(T)                                                                             \
  template Tensor<T> cross_entropy(const Tensor<T>&, const LabelMap&, std::int32_t);                             \
  template std::vector<std::uint8_t> ohem_select(const Tensor<T>&, const LabelMap&, const LossConfig&);          \
  template Tensor<T> ohem_cross_entropy(const Tensor<T>&, const LabelMap&, const LossConfig&);                   \
  template Tensor<T> semantic_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const LabelMap&,        \
                                   const LossConfig&);                                                           \
  template Tensor<T> confidence_loss(const Tensor<T>&, const Tensor<T>&, const LabelMap&, std::int32_t,          \
                                     OffsetScale, NumericMode);                                                  \
  template LossTerms<T> total_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                   const Tensor<T>&, const LabelMap&, const LossConfig&, OffsetScale);

OVENET_INSTANTIATE_LOSSES(float)
OVENET_INSTANTIATE_LOSSES(double)

}  // namespace ovenet
