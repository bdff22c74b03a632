#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace madsa {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;
using Shape = std::vector<Index>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Raised when a loss, gradient, or parameter stops being finite.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

// Row-major storage: the last dimension is the column count and all leading
// dimensions are folded into rows. Rank 0 and rank 1 tensors are single rows.
inline Index shape_rows(const Shape& shape) {
  if (shape.size() <= 1) return 1;
  return std::accumulate(shape.begin(), shape.end() - 1, Index{1}, std::multiplies<>());
}

inline Index shape_cols(const Shape& shape) { return shape.empty() ? 1 : shape.back(); }

template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = true)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    for (Index d : shape_) {
      if (d <= 0) throw DimensionError("tensor dims must be positive: " + shape_string(shape_));
    }
    value_ = Matrix<Scalar>::Zero(shape_rows(shape_), shape_cols(shape_));
  }

  Tensor(Shape shape, Matrix<Scalar> value, bool requires_grad = true)
      : Tensor(std::move(shape), requires_grad) {
    if (value.rows() != value_.rows() || value.cols() != value_.cols()) {
      throw DimensionError("value does not fit shape " + shape_string(shape_));
    }
    value_ = std::move(value);
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return value_.size(); }

  Matrix<Scalar>& value() { return value_; }
  const Matrix<Scalar>& value() const { return value_; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return grad_.size() != 0; }
  Matrix<Scalar>& grad() {
    if (!has_grad()) zero_grad();
    return grad_;
  }
  const Matrix<Scalar>& grad() const { return grad_; }
  void zero_grad() { grad_ = Matrix<Scalar>::Zero(value_.rows(), value_.cols()); }
  void clear_grad() { grad_.resize(0, 0); }

  bool all_finite() const {
    return value_.allFinite() && (!has_grad() || grad_.allFinite());
  }

 private:
  Shape shape_;
  Matrix<Scalar> value_;
  Matrix<Scalar> grad_;
  bool requires_grad_ = true;
};

// Ordered, name-addressable collection of model parameters. References stay
// valid for the lifetime of the set.
template <typename Scalar>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<Scalar> tensor;
  };

  Tensor<Scalar>& add(std::string name, Shape shape) {
    if (find(name)) throw ContractError("duplicate parameter name: " + name);
    entries_.push_back({std::move(name), Tensor<Scalar>(std::move(shape))});
    return entries_.back().tensor;
  }

  Tensor<Scalar>* find(const std::string& name) {
    for (auto& e : entries_) {
      if (e.name == name) return &e.tensor;
    }
    return nullptr;
  }
  const Tensor<Scalar>* find(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->find(name);
  }

  Tensor<Scalar>& at(const std::string& name) {
    if (auto* t = find(name)) return *t;
    throw std::out_of_range("no parameter named " + name);
  }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
  }

  bool all_finite() const {
    for (const auto& e : entries_) {
      if (!e.tensor.all_finite()) return false;
    }
    return true;
  }

  // Rounds every value to the nearest 32-bit float so that a checkpoint
  // written from this set reloads to exactly the same values.
  void round_to_float() {
    for (auto& e : entries_) {
      e.tensor.value() = e.tensor.value().template cast<float>().template cast<Scalar>();
    }
  }

 private:
  std::deque<Entry> entries_;
};

}  // namespace madsa
