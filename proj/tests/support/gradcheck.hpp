#pragma once
// Central finite-difference gradient checking for taped ops.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ovenet/ops.hpp"
#include "ovenet/tensor.hpp"

namespace ovenet::testing {

using Fn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

struct GradCheckResult {
  double rel_error = 0.0;   // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_abs_error = 0.0;
  double analytic_norm = 0.0;
  std::vector<std::vector<double>> analytic;
  std::vector<std::vector<double>> numeric;
};

inline std::vector<double> analytic_gradient(const Fn& f, const std::vector<Tensor<double>>& inputs, std::size_t i,
                                             std::vector<std::vector<double>>* all = nullptr) {
  std::vector<std::vector<double>> grads;
  {
    Tape<double> tape;
    for (const auto& x : inputs) tape.watch(x);
    const auto loss = f(inputs);
    tape.backward(loss);
    for (const auto& x : inputs) grads.push_back(x.grad());
  }
  for (const auto& x : inputs) const_cast<Tensor<double>&>(x).clear_grad();
  if (all) *all = grads;
  return grads[i];
}

/// Checks the inputs listed in `wrt` (all inputs when empty). Every input is
/// watched; the function must return a scalar.
inline GradCheckResult gradcheck(const Fn& f, std::vector<Tensor<double>> inputs, std::vector<std::size_t> wrt = {},
                                 double h = 1e-5) {
  for (auto& x : inputs) x = x.detach();
  if (wrt.empty()) {
    for (std::size_t i = 0; i < inputs.size(); ++i) wrt.push_back(i);
  }
  GradCheckResult r;
  std::vector<std::vector<double>> all;
  analytic_gradient(f, inputs, 0, &all);
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (auto i : wrt) {
    std::vector<double> numeric(static_cast<std::size_t>(inputs[i].numel()));
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      auto v = inputs[i].mutable_values();
      const double orig = v[j];
      v[j] = orig + h;
      const double up = f(inputs).item();
      inputs[i].mutable_values()[j] = orig - h;
      const double down = f(inputs).item();
      inputs[i].mutable_values()[j] = orig;
      numeric[j] = (up - down) / (2.0 * h);
    }
    const auto& analytic = all[i];
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      const double a = analytic.empty() ? 0.0 : analytic[j];
      diff2 += (a - numeric[j]) * (a - numeric[j]);
      a2 += a * a;
      n2 += numeric[j] * numeric[j];
      r.max_abs_error = std::max(r.max_abs_error, std::abs(a - numeric[j]));
    }
    r.analytic.push_back(analytic);
    r.numeric.push_back(std::move(numeric));
  }
  r.analytic_norm = std::sqrt(a2);
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-300});
  r.rel_error = std::sqrt(diff2) / denom;
  return r;
}

/// Fixed random weights turning a tensor-valued op into a scalar one.
inline Tensor<double> projection(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : w) x = u(rng);
  return Tensor<double>(shape, std::move(w));
}

inline Tensor<double> project(const Tensor<double>& out, std::uint64_t seed = 99) {
  return sum(mul(out, projection(out.shape(), seed)));
}

inline Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = u(rng);
  return Tensor<double>(shape, std::move(v));
}

}  // namespace ovenet::testing
