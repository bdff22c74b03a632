#pragma once

#include "madsa/tensor/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace madsa {

template <typename Scalar>
struct GradientCheckResult {
  Scalar max_relative_error = 0;
  // False when two evaluations at the same point disagreed, in which case
  // the finite differences cannot be trusted.
  bool reliable = true;
};

// Compares the reverse-mode gradient of a scalar function with respect to x
// against central differences. f must build its graph on the tape it is
// given and bind x through Tape::param. Grad buffers of all tensors are left
// untouched.
template <typename Scalar>
GradientCheckResult<Scalar> gradient_check(const std::function<Var<Scalar>(Tape<Scalar>&)>& f, Tensor<Scalar>& x,
                                           Scalar eps) {
  auto eval = [&] {
    Tape<Scalar> tape;
    Var<Scalar> out = f(tape);
    if (out.rows() != 1 || out.cols() != 1) throw ContractError("gradient_check: function is not scalar-valued");
    return out.value()(0, 0);
  };

  Matrix<Scalar> analytic;
  Scalar base = 0;
  {
    Tape<Scalar> tape;
    Var<Scalar> out = f(tape);
    Var<Scalar> xv = tape.param(x);
    tape.backward(out, false);
    analytic = tape.grad(xv);
    base = out.value()(0, 0);
  }

  GradientCheckResult<Scalar> result;
  if (eval() != base) result.reliable = false;

  Matrix<Scalar>& value = x.value();
  for (Index i = 0; i < value.size(); ++i) {
    const Scalar orig = value.data()[i];
    value.data()[i] = orig + eps;
    const Scalar plus = eval();
    value.data()[i] = orig - eps;
    const Scalar minus = eval();
    value.data()[i] = orig;
    const Scalar numeric = (plus - minus) / (Scalar(2) * eps);
    const Scalar a = analytic.data()[i];
    const Scalar denom = std::max({std::abs(a), std::abs(numeric), Scalar(1e-8)});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
  }
  return result;
}

}  // namespace madsa
