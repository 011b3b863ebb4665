#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle: copying a Tensor aliases the same storage.
// Tensors become "tracked" either by being watched on a Tape (leaves, i.e.
// trainable parameters) or by being produced by an op whose inputs are
// tracked. Untracked tensors never receive gradients.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovenet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// How log/div treat arguments at or below zero. kStrict raises NumericError;
/// kClamped clamps the argument to at least kClampEpsilon.
enum class NumericMode { kStrict, kClamped };
inline constexpr double kClampEpsilon = 1e-12;

template <typename T>
class Tape;

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;
  Tape<T>* tape = nullptr;
  bool leaf = false;
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using value_type = T;

  /// Rank-0 tensor holding a single zero.
  Tensor();
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::int64_t dim(std::size_t axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->values.size()); }

  std::span<const T> values() const { return node_->values; }
  /// Writable view; refused once the tensor participates in a recording.
  std::span<T> mutable_values();
  T item() const;
  T operator[](std::int64_t flat_index) const { return node_->values[static_cast<std::size_t>(flat_index)]; }

  const std::vector<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void clear_grad() { node_->grad.clear(); }

  bool tracked() const { return node_->tape != nullptr; }
  Tape<T>* tape() const { return node_->tape; }

  /// Deep copy with no tape association.
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class Tape<T>;
  explicit Tensor(std::shared_ptr<detail::TensorNode<T>> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::TensorNode<T>> node_;
};

/// Per-input gradients returned by a backward rule. An entry may be left
/// empty when the corresponding input does not need a gradient.
template <typename T>
using InputGrads = std::vector<std::vector<T>>;

template <typename T>
using BackwardFn =
    std::function<InputGrads<T>(std::span<const T> out_grad, const std::vector<bool>& needs_grad)>;

template <typename T>
using ForwardFn = std::function<Tensor<T>()>;

/// Ordered record of differentiable operations. Single-threaded. A tape is
/// consumed by one call to backward(); destroying it detaches every tensor it
/// touched so parameters can be watched again by a fresh tape.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Marks a leaf tensor (a parameter) as requiring gradient on this tape.
  void watch(const Tensor<T>& leaf);

  Tensor<T> record(std::string op_kind, const std::vector<Tensor<T>>& inputs,
                   const ForwardFn<T>& forward, BackwardFn<T> backward);

  /// Populates grad() of every watched leaf with d(loss)/d(leaf). Leaves that
  /// the loss does not depend on receive zeros.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  const std::string& op_kind(std::size_t i) const { return nodes_.at(i).kind; }

 private:
  struct Node {
    std::string kind;
    std::vector<std::shared_ptr<detail::TensorNode<T>>> inputs;
    std::shared_ptr<detail::TensorNode<T>> output;
    BackwardFn<T> backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::shared_ptr<detail::TensorNode<T>>> leaves_;
  bool consumed_ = false;
};

/// Runs forward(); when any input is tracked the result is recorded on the
/// shared tape of the tracked inputs. Mixing tensors from two tapes is an
/// error.
template <typename T>
Tensor<T> record(std::string op_kind, const std::vector<Tensor<T>>& inputs,
                 const ForwardFn<T>& forward, BackwardFn<T> backward);

}  // namespace ovenet
