#include "ovenet/ops.hpp"

#include <algorithm>
#include <cmath>

namespace ovenet {
namespace {

template <typename T>
using Values = std::vector<T>;

// Elementwise binary op with scalar broadcast. `fn(a, b)` computes the value,
// `da(a, b, out)` and `db(a, b, out)` the local partials.
template <typename T, typename Fn, typename Da, typename Db>
Tensor<T> binary(const char* kind, const Tensor<T>& a, const Tensor<T>& b, Fn fn, Da da, Db db) {
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw ShapeError(std::string(kind) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const auto n = static_cast<std::size_t>(shape_numel(out_shape));
  auto av = a.values();
  auto bv = b.values();
  auto a_at = [=](std::size_t i) { return a_scalar ? av[0] : av[i]; };
  auto b_at = [=](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };

  return record<T>(
      kind, {a, b},
      [&] {
        Values<T> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(a_at(i), b_at(i));
        return Tensor<T>(out_shape, std::move(out));
      },
      [a, b, a_scalar, b_scalar, n, da, db](std::span<const T> g, const std::vector<bool>& needs) {
        auto av = a.values();
        auto bv = b.values();
        InputGrads<T> grads(2);
        if (needs[0]) {
          grads[0].assign(av.size(), T(0));
          for (std::size_t i = 0; i < n; ++i) {
            const T x = a_scalar ? av[0] : av[i];
            const T y = b_scalar ? bv[0] : bv[i];
            grads[0][a_scalar ? 0 : i] += g[i] * da(x, y);
          }
        }
        if (needs[1]) {
          grads[1].assign(bv.size(), T(0));
          for (std::size_t i = 0; i < n; ++i) {
            const T x = a_scalar ? av[0] : av[i];
            const T y = b_scalar ? bv[0] : bv[i];
            grads[1][b_scalar ? 0 : i] += g[i] * db(x, y);
          }
        }
        return grads;
      });
}

// Elementwise unary op; `deriv(x, y)` gets the input and output value.
template <typename T, typename Fn, typename Deriv>
Tensor<T> unary(const char* kind, const Tensor<T>& a, Fn fn, Deriv deriv) {
  return record<T>(
      kind, {a},
      [&] {
        auto av = a.values();
        Values<T> out(av.size());
        for (std::size_t i = 0; i < av.size(); ++i) out[i] = fn(av[i]);
        return Tensor<T>(a.shape(), std::move(out));
      },
      [a, fn, deriv](std::span<const T> g, const std::vector<bool>&) {
        auto av = a.values();
        InputGrads<T> grads(1);
        grads[0].resize(av.size());
        for (std::size_t i = 0; i < av.size(); ++i) grads[0][i] = g[i] * deriv(av[i], fn(av[i]));
        return grads;
      });
}

struct AxisSplit {
  std::int64_t outer = 1;
  std::int64_t extent = 1;
  std::int64_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b, NumericMode mode) {
  const T eps = static_cast<T>(kClampEpsilon);
  if (mode == NumericMode::kStrict) {
    for (auto v : b.values()) {
      if (v == T(0)) throw NumericError("div: division by zero");
    }
    return binary<T>(
        "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
        [](T x, T y) { return -x / (y * y); });
  }
  // Denominator magnitude clamped to eps, sign preserved (zero counts as +).
  auto clamp = [eps](T y) { return std::abs(y) >= eps ? y : (y < T(0) ? -eps : eps); };
  return binary<T>(
      "div", a, b, [clamp](T x, T y) { return x / clamp(y); }, [clamp](T, T y) { return T(1) / clamp(y); },
      [eps](T x, T y) { return std::abs(y) >= eps ? -x / (y * y) : T(0); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return unary<T>("neg", a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary<T>("scale", a, [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary<T>("add_scalar", a, [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary<T>("exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a, NumericMode mode) {
  const T eps = static_cast<T>(kClampEpsilon);
  if (mode == NumericMode::kStrict) {
    for (auto v : a.values()) {
      if (!(v > T(0))) throw NumericError("log: non-positive argument");
    }
    return unary<T>("log", a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
  }
  return unary<T>(
      "log", a, [eps](T x) { return std::log(std::max(x, eps)); },
      [eps](T x, T) { return x >= eps ? T(1) / x : T(0); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary<T>("tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  return record<T>(
      "sum", {a},
      [&] {
        T total = 0;
        for (auto v : a.values()) total += v;
        return Tensor<T>::scalar(total);
      },
      [n = a.values().size()](std::span<const T> g, const std::vector<bool>&) {
        return InputGrads<T>{std::vector<T>(n, g[0])};
      });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  const T inv = T(1) / static_cast<T>(a.numel());
  return record<T>(
      "mean", {a},
      [&] {
        T total = 0;
        for (auto v : a.values()) total += v;
        return Tensor<T>::scalar(total * inv);
      },
      [n = a.values().size(), inv](std::span<const T> g, const std::vector<bool>&) {
        return InputGrads<T>{std::vector<T>(n, g[0] * inv)};
      });
}

template <typename T>
Tensor<T> max_over_axis(const Tensor<T>& a, std::size_t axis) {
  if (axis >= a.rank()) {
    throw ShapeError("max_over_axis: axis " + std::to_string(axis) + " out of range for " +
                     shape_string(a.shape()));
  }
  if (a.dim(axis) == 0) throw ShapeError("max_over_axis: empty axis");
  const AxisSplit s = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(s.outer * s.inner));
  std::vector<T> out(argmax.size());
  const auto av = a.values();
  for (std::int64_t o = 0; o < s.outer; ++o) {
    for (std::int64_t i = 0; i < s.inner; ++i) {
      std::int64_t best = o * s.extent * s.inner + i;
      for (std::int64_t k = 1; k < s.extent; ++k) {
        const std::int64_t idx = (o * s.extent + k) * s.inner + i;
        if (av[idx] > av[best]) best = idx;
      }
      argmax[o * s.inner + i] = best;
      out[o * s.inner + i] = av[best];
    }
  }

  return record<T>(
      "max_over_axis", {a}, [&] { return Tensor<T>(out_shape, std::move(out)); },
      [argmax, n = a.values().size()](std::span<const T> g, const std::vector<bool>&) {
        InputGrads<T> grads(1);
        grads[0].assign(n, T(0));
        for (std::size_t j = 0; j < argmax.size(); ++j) grads[0][argmax[j]] += g[j];
        return grads;
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  return record<T>(
      "reshape", {a},
      [&] { return Tensor<T>(shape, std::vector<T>(a.values().begin(), a.values().end())); },
      [](std::span<const T> g, const std::vector<bool>&) {
        return InputGrads<T>{std::vector<T>(g.begin(), g.end())};
      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::int64_t start, std::int64_t length) {
  if (axis >= a.rank()) {
    throw ShapeError("slice: axis " + std::to_string(axis) + " out of range for " + shape_string(a.shape()));
  }
  if (start < 0 || length < 0 || start + length > a.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") exceeds extent " + std::to_string(a.dim(axis)) + " of " + shape_string(a.shape()));
  }
  const AxisSplit s = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  return record<T>(
      "slice", {a},
      [&] {
        auto av = a.values();
        std::vector<T> out(static_cast<std::size_t>(s.outer * length * s.inner));
        for (std::int64_t o = 0; o < s.outer; ++o) {
          const auto src = av.begin() + (o * s.extent + start) * s.inner;
          std::copy(src, src + length * s.inner, out.begin() + o * length * s.inner);
        }
        return Tensor<T>(out_shape, std::move(out));
      },
      [s, start, length, n = a.values().size()](std::span<const T> g, const std::vector<bool>&) {
        InputGrads<T> grads(1);
        grads[0].assign(n, T(0));
        for (std::int64_t o = 0; o < s.outer; ++o) {
          const auto src = g.begin() + o * length * s.inner;
          std::copy(src, src + length * s.inner, grads[0].begin() + (o * s.extent + start) * s.inner);
        }
        return grads;
      });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::int64_t> extents;
  for (const auto& p : parts) {
    Shape probe = p.shape();
    if (probe.size() != first.size()) {
      throw ShapeError("concat: rank mismatch " + shape_string(first) + " vs " + shape_string(probe));
    }
    probe[axis] = first[axis];
    if (probe != first) {
      throw ShapeError("concat: shape mismatch " + shape_string(first) + " vs " + shape_string(p.shape()));
    }
    extents.push_back(p.dim(axis));
    out_shape[axis] += p.dim(axis);
  }
  const AxisSplit s = split_at(out_shape, axis);

  return record<T>(
      "concat", parts,
      [&] {
        std::vector<T> out(static_cast<std::size_t>(shape_numel(out_shape)));
        std::int64_t offset = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          auto pv = parts[p].values();
          const std::int64_t block = extents[p] * s.inner;
          for (std::int64_t o = 0; o < s.outer; ++o) {
            std::copy(pv.begin() + o * block, pv.begin() + (o + 1) * block,
                      out.begin() + (o * s.extent + offset) * s.inner);
          }
          offset += extents[p];
        }
        return Tensor<T>(out_shape, std::move(out));
      },
      [s, extents](std::span<const T> g, const std::vector<bool>& needs) {
        InputGrads<T> grads(extents.size());
        std::int64_t offset = 0;
        for (std::size_t p = 0; p < extents.size(); ++p) {
          const std::int64_t block = extents[p] * s.inner;
          if (needs[p]) {
            grads[p].resize(static_cast<std::size_t>(s.outer * block));
            for (std::int64_t o = 0; o < s.outer; ++o) {
              const auto src = g.begin() + (o * s.extent + offset) * s.inner;
              std::copy(src, src + block, grads[p].begin() + o * block);
            }
          }
          offset += extents[p];
        }
        return grads;
      });
}

#define OVENET_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&, NumericMode);               \
  template Tensor<T> neg(const Tensor<T>&);                                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                         \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                    \
  template Tensor<T> exp(const Tensor<T>&);                                              \
  template Tensor<T> log(const Tensor<T>&, NumericMode);                                 \
  template Tensor<T> tanh(const Tensor<T>&);                                             \
  template Tensor<T> sum(const Tensor<T>&);                                              \
  template Tensor<T> mean(const Tensor<T>&);                                             \
  template Tensor<T> max_over_axis(const Tensor<T>&, std::size_t);                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                   \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::int64_t, std::int64_t);   \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);

OVENET_INSTANTIATE_OPS(float)
OVENET_INSTANTIATE_OPS(double)

}  // namespace ovenet
