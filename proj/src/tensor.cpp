#include "ovenet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ovenet {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) {
    if (extent < 0) throw ShapeError("negative extent in shape " + shape_string(shape));
    n *= extent;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

template <typename T>
Tensor<T>::Tensor() : node_(std::make_shared<detail::TensorNode<T>>()) {
  node_->values.assign(1, T(0));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::TensorNode<T>>()) {
  const auto n = shape_numel(shape);
  node_->shape = std::move(shape);
  node_->values.assign(static_cast<std::size_t>(n), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::TensorNode<T>>()) {
  const auto n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("tensor: shape " + shape_string(shape) + " needs " + std::to_string(n) +
                     " values, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->values = std::move(values);
}

template <typename T>
std::int64_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(node_->shape));
  }
  return node_->shape[axis];
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
  if (node_->tape != nullptr) throw Error("tensor: cannot mutate a tensor recorded on a tape");
  return node_->values;
}

template <typename T>
T Tensor<T>::item() const {
  if (node_->values.size() != 1) {
    throw ShapeError("tensor: item() on non-scalar shape " + shape_string(node_->shape));
  }
  return node_->values[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->values);
}

template <typename T>
Tape<T>::~Tape() {
  for (auto& leaf : leaves_) {
    if (leaf->tape == this) leaf->tape = nullptr;
  }
  for (auto& node : nodes_) {
    if (node.output->tape == this) node.output->tape = nullptr;
  }
}

template <typename T>
void Tape<T>::watch(const Tensor<T>& leaf) {
  auto& node = leaf.node_;
  if (node->tape == this) return;
  if (node->tape != nullptr) throw Error("tape: tensor is already watched by another tape");
  if (consumed_) throw Error("tape: cannot watch after backward()");
  node->tape = this;
  node->leaf = true;
  leaves_.push_back(node);
}

template <typename T>
Tensor<T> Tape<T>::record(std::string op_kind, const std::vector<Tensor<T>>& inputs,
                          const ForwardFn<T>& forward, BackwardFn<T> backward) {
  if (consumed_) throw Error("tape: cannot record " + op_kind + " after backward()");
  Tensor<T> out = forward();
  if (out.node_->tape != nullptr) {
    throw Error("tape: forward of " + op_kind + " returned a tracked tensor");
  }
  for (auto v : out.node_->values) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericError("non-finite value produced by op '" + op_kind + "' (output #" +
                         std::to_string(nodes_.size()) + ", shape " + shape_string(out.shape()) + ")");
    }
  }
  Node node;
  node.kind = std::move(op_kind);
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) node.inputs.push_back(in.node_);
  node.output = out.node_;
  node.backward = std::move(backward);
  out.node_->tape = this;
  nodes_.push_back(std::move(node));
  return out;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw Error("tape: backward() already called");
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  }
  if (loss.node_->tape != this) throw Error("backward: loss was not produced on this tape");
  consumed_ = true;

  loss.node_->grad.assign(1, T(1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& node = *it;
    auto& out = *node.output;
    if (out.grad.empty()) continue;
    std::vector<bool> needs(node.inputs.size());
    bool any = false;
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      needs[i] = node.inputs[i]->tape == this;
      any = any || needs[i];
    }
    if (any) {
      InputGrads<T> grads = node.backward(out.grad, needs);
      if (grads.size() != node.inputs.size()) {
        throw Error("backward of '" + node.kind + "' returned " + std::to_string(grads.size()) +
                    " gradients for " + std::to_string(node.inputs.size()) + " inputs");
      }
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        if (!needs[i] || grads[i].empty()) continue;
        auto& in = *node.inputs[i];
        if (grads[i].size() != in.values.size()) {
          throw ShapeError("backward of '" + node.kind + "': gradient for input " + std::to_string(i) +
                           " has " + std::to_string(grads[i].size()) + " values, expected " +
                           std::to_string(in.values.size()));
        }
        if (in.grad.empty()) {
          in.grad = std::move(grads[i]);
        } else {
          for (std::size_t j = 0; j < in.grad.size(); ++j) in.grad[j] += grads[i][j];
        }
      }
    }
    if (!out.leaf) {
      out.grad.clear();
      out.grad.shrink_to_fit();
    }
  }
  for (auto& leaf : leaves_) {
    if (leaf->grad.empty()) leaf->grad.assign(leaf->values.size(), T(0));
  }
}

template <typename T>
Tensor<T> record(std::string op_kind, const std::vector<Tensor<T>>& inputs, const ForwardFn<T>& forward,
                 BackwardFn<T> backward) {
  Tape<T>* tape = nullptr;
  for (const auto& in : inputs) {
    if (!in.tracked()) continue;
    if (tape != nullptr && in.tape() != tape) {
      throw Error("op '" + op_kind + "': inputs are recorded on different tapes");
    }
    tape = in.tape();
  }
  if (tape == nullptr) return forward();
  return tape->record(std::move(op_kind), inputs, forward, std::move(backward));
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template Tensor<float> record(std::string, const std::vector<Tensor<float>>&, const ForwardFn<float>&,
                              BackwardFn<float>);
template Tensor<double> record(std::string, const std::vector<Tensor<double>>&, const ForwardFn<double>&,
                               BackwardFn<double>);

}  // namespace ovenet
