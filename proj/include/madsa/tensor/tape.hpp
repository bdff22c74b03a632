#pragma once

#include "madsa/tensor/tensor.hpp"

#include <deque>
#include <functional>
#include <initializer_list>
#include <unordered_map>

namespace madsa {

template <typename Scalar>
class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid while the
// tape that produced it has not been cleared.
template <typename Scalar>
class Var {
 public:
  Var() = default;

  const Matrix<Scalar>& value() const { return tape_->value(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(*this); }
  Tape<Scalar>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<Scalar>;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records primitive operations in execution order. Because a node can only
// reference nodes recorded before it, reverse insertion order is a valid
// topological order for the backward sweep.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = std::function<void(Tape&, const Mat& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, {}, nullptr); }

  // Leaf bound to a tensor. Binding the same tensor twice returns the same
  // node so that its gradient is gathered in one place.
  Var<Scalar> param(Tensor<Scalar>& tensor) {
    if (auto it = bound_.find(&tensor); it != bound_.end()) return Var<Scalar>(this, it->second);
    Var<Scalar> v = push(tensor.value(), tensor.requires_grad(), {}, &tensor);
    bound_.emplace(&tensor, v.id());
    return v;
  }

  // Frozen view of a tensor: participates in the forward pass only.
  Var<Scalar> frozen(const Tensor<Scalar>& tensor) { return constant(tensor.value()); }

  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> inputs, BackwardFn fn) {
    bool needs = false;
    for (const auto& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{}, nullptr);
  }

  // Same as record() for ops with a variable number of inputs.
  Var<Scalar> record(Mat value, const std::vector<Var<Scalar>>& inputs, BackwardFn fn) {
    bool needs = false;
    for (const auto& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{}, nullptr);
  }

  template <typename Derived>
  void accumulate(const Var<Scalar>& v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  // Adds lhs * rhs without materializing the product separately.
  template <typename L, typename R>
  void accumulate_product(const Var<Scalar>& v, const L& lhs, const R& rhs) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad.noalias() = lhs * rhs;
    } else {
      n.grad.noalias() += lhs * rhs;
    }
  }

  // Adds g into the block of v's gradient starting at (row, col).
  template <typename Derived>
  void accumulate_block(const Var<Scalar>& v, Index row, Index col, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad.block(row, col, g.rows(), g.cols()) += g;
  }

  // Reverse sweep from a scalar loss. When write_to_sources is set, the
  // gradients of bound leaves are added into their tensors' grad buffers;
  // bound tensors the loss does not reach receive a zero gradient.
  void backward(const Var<Scalar>& loss, bool write_to_sources = true) {
    check_owner(loss);
    const Mat& lv = nodes_[loss.id()].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward() needs a scalar loss, got " + std::to_string(lv.rows()) + "x" +
                          std::to_string(lv.cols()));
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[loss.id()].grad = Mat::Ones(1, 1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
    }
    if (!write_to_sources) return;
    for (auto& n : nodes_) {
      if (n.source == nullptr || !n.requires_grad) continue;
      Tensor<Scalar>& t = *n.source;
      if (!t.has_grad()) t.zero_grad();
      if (n.grad.size() != 0) t.grad() += n.grad;
    }
  }

  // Gradient gathered at a node by the last backward() call (zeros if the
  // node was not reached).
  Mat grad(const Var<Scalar>& v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void clear() {
    nodes_.clear();
    bound_.clear();
  }

  std::size_t size() const { return nodes_.size(); }

  const Mat& value(const Var<Scalar>& v) const { return nodes_[v.id()].value; }
  bool requires_grad(const Var<Scalar>& v) const { return nodes_[v.id()].requires_grad; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
    Tensor<Scalar>* source = nullptr;
  };

  Var<Scalar> push(Mat value, bool requires_grad, BackwardFn fn, Tensor<Scalar>* source) {
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(fn), source});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  void check_owner(const Var<Scalar>& v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) {
      throw ContractError("variable does not belong to this tape");
    }
  }

  std::deque<Node> nodes_;
  std::unordered_map<const Tensor<Scalar>*, std::size_t> bound_;
};

}  // namespace madsa
