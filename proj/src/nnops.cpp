#include "ovenet/nnops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace ovenet {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

void require_rank4(const char* op, const Shape& shape, const char* what) {
  if (shape.size() != 4) {
    throw ShapeError(std::string(op) + ": " + what + " must be rank 4 (B,C,H,W), got " + shape_string(shape));
  }
}

struct ConvGeometry {
  std::int64_t in_c, in_h, in_w, out_c, out_h, out_w, kh, kw;
  int stride, pad;
};

// col is (in_c*kh*kw, out_h*out_w), row-major.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  const std::int64_t plane = g.out_h * g.out_w;
  for (std::int64_t c = 0; c < g.in_c; ++c) {
    const T* src = image + c * g.in_h * g.in_w;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        T* dst = col + ((c * g.kh + ky) * g.kw + kx) * plane;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          T* row = dst + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(row, row + g.out_w, T(0));
            continue;
          }
          const T* src_row = src + iy * g.in_w;
          // Output columns whose input column lies inside the image.
          const std::int64_t shift = kx - g.pad;
          const std::int64_t lo = std::clamp<std::int64_t>((-shift + g.stride - 1) / g.stride, 0, g.out_w);
          const std::int64_t hi = std::clamp<std::int64_t>((g.in_w - shift + g.stride - 1) / g.stride, lo, g.out_w);
          std::fill(row, row + lo, T(0));
          if (g.stride == 1) {
            std::copy(src_row + lo + shift, src_row + hi + shift, row + lo);
          } else {
            for (std::int64_t ox = lo; ox < hi; ++ox) row[ox] = src_row[ox * g.stride + shift];
          }
          std::fill(row + hi, row + g.out_w, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* image) {
  const std::int64_t plane = g.out_h * g.out_w;
  for (std::int64_t c = 0; c < g.in_c; ++c) {
    T* dst = image + c * g.in_h * g.in_w;
    for (std::int64_t ky = 0; ky < g.kh; ++ky) {
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const T* src = col + ((c * g.kh + ky) * g.kw + kx) * plane;
        for (std::int64_t oy = 0; oy < g.out_h; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          T* dst_row = dst + iy * g.in_w;
          const T* src_row = src + oy * g.out_w;
          const std::int64_t shift = kx - g.pad;
          const std::int64_t lo = std::clamp<std::int64_t>((-shift + g.stride - 1) / g.stride, 0, g.out_w);
          const std::int64_t hi = std::clamp<std::int64_t>((g.in_w - shift + g.stride - 1) / g.stride, lo, g.out_w);
          for (std::int64_t ox = lo; ox < hi; ++ox) dst_row[ox * g.stride + shift] += src_row[ox];
        }
      }
    }
  }
}

template <typename T, typename Fn, typename Deriv>
Tensor<T> pointwise(const char* kind, const Tensor<T>& x, Fn fn, Deriv deriv_from_output) {
  return record<T>(
      kind, {x},
      [&] {
        auto xv = x.values();
        std::vector<T> out(xv.size());
        for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fn(xv[i]);
        return Tensor<T>(x.shape(), std::move(out));
      },
      [x, fn, deriv_from_output](std::span<const T> g, const std::vector<bool>&) {
        auto xv = x.values();
        InputGrads<T> grads(1);
        grads[0].resize(xv.size());
        for (std::size_t i = 0; i < xv.size(); ++i) grads[0][i] = g[i] * deriv_from_output(xv[i], fn(xv[i]));
        return grads;
      });
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, int stride,
                 int padding) {
  require_rank4("conv2d", input.shape(), "input");
  require_rank4("conv2d", weight.shape(), "weight");
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
  ConvGeometry g{};
  const std::int64_t batch = input.dim(0);
  g.in_c = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_c = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (weight.dim(1) != g.in_c) {
    throw ShapeError("conv2d: channel mismatch, input has " + std::to_string(g.in_c) + " channels but weight " +
                     shape_string(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (bias.shape() != Shape{g.out_c}) {
    throw ShapeError("conv2d: bias shape " + shape_string(bias.shape()) + " does not match " +
                     std::to_string(g.out_c) + " output channels");
  }
  g.out_h = (g.in_h + 2 * padding - g.kh) / stride + 1;
  g.out_w = (g.in_w + 2 * padding - g.kw) / stride + 1;
  if (g.out_h < 1 || g.out_w < 1) throw ShapeError("conv2d: kernel larger than padded input");

  const std::int64_t patch = g.in_c * g.kh * g.kw;
  const std::int64_t plane = g.out_h * g.out_w;
  const std::int64_t in_image = g.in_c * g.in_h * g.in_w;
  const std::int64_t out_image = g.out_c * plane;

  return record<T>(
      "conv2d", {input, weight, bias},
      [&] {
        std::vector<T> out(static_cast<std::size_t>(batch * out_image));
        std::vector<T> col(static_cast<std::size_t>(patch * plane));
        ConstMatMap<T> w(weight.values().data(), g.out_c, patch);
        auto bv = bias.values();
        for (std::int64_t b = 0; b < batch; ++b) {
          im2col(input.values().data() + b * in_image, g, col.data());
          MatMap<T> y(out.data() + b * out_image, g.out_c, plane);
          y.noalias() = w * ConstMatMap<T>(col.data(), patch, plane);
          for (std::int64_t c = 0; c < g.out_c; ++c) y.row(c).array() += bv[c];
        }
        return Tensor<T>(Shape{batch, g.out_c, g.out_h, g.out_w}, std::move(out));
      },
      [input, weight, g, batch, patch, plane, in_image, out_image](std::span<const T> grad_out,
                                                                   const std::vector<bool>& needs) {
        InputGrads<T> grads(3);
        std::vector<T> col(static_cast<std::size_t>(patch * plane));
        std::vector<T> dcol;
        if (needs[0]) {
          grads[0].assign(static_cast<std::size_t>(batch * in_image), T(0));
          dcol.resize(col.size());
        }
        if (needs[1]) grads[1].assign(static_cast<std::size_t>(g.out_c * patch), T(0));
        if (needs[2]) grads[2].assign(static_cast<std::size_t>(g.out_c), T(0));
        ConstMatMap<T> w(weight.values().data(), g.out_c, patch);
        for (std::int64_t b = 0; b < batch; ++b) {
          ConstMatMap<T> gy(grad_out.data() + b * out_image, g.out_c, plane);
          if (needs[1]) {
            im2col(input.values().data() + b * in_image, g, col.data());
            MatMap<T> gw(grads[1].data(), g.out_c, patch);
            gw.noalias() += gy * ConstMatMap<T>(col.data(), patch, plane).transpose();
          }
          if (needs[2]) {
            // Plain loop: Eigen's vectorized sum peels by alignment, which
            // would make the rounding depend on where the buffer landed.
            const T* gp = grad_out.data() + b * out_image;
            for (std::int64_t c = 0; c < g.out_c; ++c) {
              T acc = T(0);
              for (std::int64_t i = 0; i < plane; ++i) acc += gp[c * plane + i];
              grads[2][c] += acc;
            }
          }
          if (needs[0]) {
            MatMap<T> gc(dcol.data(), patch, plane);
            gc.noalias() = w.transpose() * gy;
            col2im_add(dcol.data(), g, grads[0].data() + b * in_image);
          }
        }
        return grads;
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return pointwise<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return pointwise<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
  require_rank4("softmax_channels", x.shape(), "input");
  const std::int64_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (channels < 1) throw ShapeError("softmax_channels: need at least one channel");
  std::vector<T> probs(x.values().size());
  {
    auto xv = x.values();
    for (std::int64_t b = 0; b < batch; ++b) {
      const T* src = xv.data() + b * channels * plane;
      T* dst = probs.data() + b * channels * plane;
      for (std::int64_t p = 0; p < plane; ++p) {
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
      }
    }
  }
  Tensor<T> result(x.shape(), probs);
  return record<T>(
      "softmax_channels", {x}, [&] { return result; },
      [result, batch, channels, plane](std::span<const T> g, const std::vector<bool>&) {
        auto s = result.values();
        InputGrads<T> grads(1);
        grads[0].resize(s.size());
        for (std::int64_t b = 0; b < batch; ++b) {
          const std::int64_t base = b * channels * plane;
          for (std::int64_t p = 0; p < plane; ++p) {
            T dot = 0;
            for (std::int64_t k = 0; k < channels; ++k) dot += g[base + k * plane + p] * s[base + k * plane + p];
            for (std::int64_t k = 0; k < channels; ++k) {
              const auto i = base + k * plane + p;
              grads[0][i] = s[i] * (g[i] - dot);
            }
          }
        }
        return grads;
      });
}

namespace {

template <typename T>
struct SampleCell {
  std::int64_t x0, x1, y0, y1;
  T fx, fy;
  bool clamped_u, clamped_v;
};

template <typename T>
SampleCell<T> locate(T u, T v, std::int64_t height, std::int64_t width) {
  SampleCell<T> c{};
  const T max_u = static_cast<T>(width - 1);
  const T max_v = static_cast<T>(height - 1);
  c.clamped_u = u < T(0) || u > max_u;
  c.clamped_v = v < T(0) || v > max_v;
  const T cu = std::clamp(u, T(0), max_u);
  const T cv = std::clamp(v, T(0), max_v);
  c.x0 = static_cast<std::int64_t>(std::floor(cu));
  c.y0 = static_cast<std::int64_t>(std::floor(cv));
  c.x1 = std::min(c.x0 + 1, width - 1);
  c.y1 = std::min(c.y0 + 1, height - 1);
  c.fx = cu - static_cast<T>(c.x0);
  c.fy = cv - static_cast<T>(c.y0);
  return c;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_grid_sample(const Tensor<T>& features, const Tensor<T>& points) {
  require_rank4("bilinear_grid_sample", features.shape(), "features");
  require_rank4("bilinear_grid_sample", points.shape(), "points");
  const std::int64_t batch = features.dim(0), channels = features.dim(1);
  const std::int64_t height = features.dim(2), width = features.dim(3);
  if (points.dim(0) != batch || points.dim(1) != 2) {
    throw ShapeError("bilinear_grid_sample: points " + shape_string(points.shape()) +
                     " must be (B=" + std::to_string(batch) + ",2,Ho,Wo)");
  }
  if (height < 1 || width < 1) throw ShapeError("bilinear_grid_sample: empty feature map");
  for (auto p : points.values()) {
    if (std::isnan(static_cast<double>(p))) throw NumericError("bilinear_grid_sample: NaN coordinate");
  }
  const std::int64_t out_h = points.dim(2), out_w = points.dim(3);
  const std::int64_t out_plane = out_h * out_w, in_plane = height * width;

  return record<T>(
      "bilinear_grid_sample", {features, points},
      [&] {
        auto fv = features.values();
        auto pv = points.values();
        std::vector<T> out(static_cast<std::size_t>(batch * channels * out_plane));
        for (std::int64_t b = 0; b < batch; ++b) {
          const T* pu = pv.data() + b * 2 * out_plane;
          const T* pvv = pu + out_plane;
          for (std::int64_t p = 0; p < out_plane; ++p) {
            const auto c = locate(pu[p], pvv[p], height, width);
            for (std::int64_t k = 0; k < channels; ++k) {
              const T* f = fv.data() + (b * channels + k) * in_plane;
              const T top = (T(1) - c.fx) * f[c.y0 * width + c.x0] + c.fx * f[c.y0 * width + c.x1];
              const T bottom = (T(1) - c.fx) * f[c.y1 * width + c.x0] + c.fx * f[c.y1 * width + c.x1];
              out[(b * channels + k) * out_plane + p] = (T(1) - c.fy) * top + c.fy * bottom;
            }
          }
        }
        return Tensor<T>(Shape{batch, channels, out_h, out_w}, std::move(out));
      },
      [features, points, batch, channels, height, width, out_plane, in_plane](std::span<const T> g,
                                                                            const std::vector<bool>& needs) {
        auto fv = features.values();
        auto pv = points.values();
        InputGrads<T> grads(2);
        if (needs[0]) grads[0].assign(fv.size(), T(0));
        if (needs[1]) grads[1].assign(pv.size(), T(0));
        for (std::int64_t b = 0; b < batch; ++b) {
          const T* pu = pv.data() + b * 2 * out_plane;
          const T* pvv = pu + out_plane;
          for (std::int64_t p = 0; p < out_plane; ++p) {
            const auto c = locate(pu[p], pvv[p], height, width);
            const std::int64_t i00 = c.y0 * width + c.x0, i01 = c.y0 * width + c.x1;
            const std::int64_t i10 = c.y1 * width + c.x0, i11 = c.y1 * width + c.x1;
            T du = 0, dv = 0;
            for (std::int64_t k = 0; k < channels; ++k) {
              const T go = g[(b * channels + k) * out_plane + p];
              const std::int64_t base = (b * channels + k) * in_plane;
              if (needs[0]) {
                grads[0][base + i00] += go * (T(1) - c.fx) * (T(1) - c.fy);
                grads[0][base + i01] += go * c.fx * (T(1) - c.fy);
                grads[0][base + i10] += go * (T(1) - c.fx) * c.fy;
                grads[0][base + i11] += go * c.fx * c.fy;
              }
              if (needs[1]) {
                const T f00 = fv[base + i00], f01 = fv[base + i01], f10 = fv[base + i10], f11 = fv[base + i11];
                du += go * ((T(1) - c.fy) * (f01 - f00) + c.fy * (f11 - f10));
                dv += go * ((T(1) - c.fx) * (f10 - f00) + c.fx * (f11 - f01));
              }
            }
            if (needs[1]) {
              if (!c.clamped_u) grads[1][b * 2 * out_plane + p] = du;
              if (!c.clamped_v) grads[1][b * 2 * out_plane + out_plane + p] = dv;
            }
          }
        }
        return grads;
      });
}

namespace {

template <typename T>
struct ResizeTap {
  std::int64_t lo, hi;
  T w_hi;
};

template <typename T>
std::vector<ResizeTap<T>> resize_taps(std::int64_t in, std::int64_t out) {
  std::vector<ResizeTap<T>> taps(static_cast<std::size_t>(out));
  const T ratio = static_cast<T>(in) / static_cast<T>(out);
  for (std::int64_t i = 0; i < out; ++i) {
    T src = (static_cast<T>(i) + T(0.5)) * ratio - T(0.5);
    if (src < T(0)) src = T(0);
    auto lo = std::min(static_cast<std::int64_t>(std::floor(src)), in - 1);
    taps[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<T>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& features, std::int64_t out_height, std::int64_t out_width) {
  require_rank4("upsample_bilinear", features.shape(), "features");
  const std::int64_t batch = features.dim(0), channels = features.dim(1);
  const std::int64_t height = features.dim(2), width = features.dim(3);
  if (out_height < height || out_width < width) {
    throw ShapeError("upsample_bilinear: target " + std::to_string(out_height) + "x" + std::to_string(out_width) +
                     " smaller than source " + std::to_string(height) + "x" + std::to_string(width));
  }
  const auto ty = resize_taps<T>(height, out_height);
  const auto tx = resize_taps<T>(width, out_width);
  const std::int64_t maps = batch * channels;
  const std::int64_t in_plane = height * width, out_plane = out_height * out_width;

  return record<T>(
      "upsample_bilinear", {features},
      [&] {
        auto fv = features.values();
        std::vector<T> out(static_cast<std::size_t>(maps * out_plane));
        for (std::int64_t m = 0; m < maps; ++m) {
          const T* src = fv.data() + m * in_plane;
          T* dst = out.data() + m * out_plane;
          for (std::int64_t y = 0; y < out_height; ++y) {
            const auto& a = ty[y];
            for (std::int64_t x = 0; x < out_width; ++x) {
              const auto& b = tx[x];
              const T top = (T(1) - b.w_hi) * src[a.lo * width + b.lo] + b.w_hi * src[a.lo * width + b.hi];
              const T bottom = (T(1) - b.w_hi) * src[a.hi * width + b.lo] + b.w_hi * src[a.hi * width + b.hi];
              dst[y * out_width + x] = (T(1) - a.w_hi) * top + a.w_hi * bottom;
            }
          }
        }
        return Tensor<T>(Shape{batch, channels, out_height, out_width}, std::move(out));
      },
      [ty, tx, maps, width, in_plane, out_plane, out_height, out_width](std::span<const T> g,
                                                                        const std::vector<bool>&) {
        InputGrads<T> grads(1);
        grads[0].assign(static_cast<std::size_t>(maps * in_plane), T(0));
        for (std::int64_t m = 0; m < maps; ++m) {
          T* dst = grads[0].data() + m * in_plane;
          const T* src = g.data() + m * out_plane;
          for (std::int64_t y = 0; y < out_height; ++y) {
            const auto& a = ty[y];
            for (std::int64_t x = 0; x < out_width; ++x) {
              const auto& b = tx[x];
              const T go = src[y * out_width + x];
              dst[a.lo * width + b.lo] += go * (T(1) - a.w_hi) * (T(1) - b.w_hi);
              dst[a.lo * width + b.hi] += go * (T(1) - a.w_hi) * b.w_hi;
              dst[a.hi * width + b.lo] += go * a.w_hi * (T(1) - b.w_hi);
              dst[a.hi * width + b.hi] += go * a.w_hi * b.w_hi;
            }
          }
        }
        return grads;
      });
}

#define OVENET_INSTANTIATE_NNOPS(T)                                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);          \
  template Tensor<T> relu(const Tensor<T>&);                                                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                      \
  template Tensor<T> softmax_channels(const Tensor<T>&);                                             \
  template Tensor<T> bilinear_grid_sample(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, std::int64_t, std::int64_t);

OVENET_INSTANTIATE_NNOPS(float)
OVENET_INSTANTIATE_NNOPS(double)

}  // namespace ovenet
