#pragma once

// Composite operations built from the primitives in ops.hpp. Their gradients
// follow from the primitives, so they need no backward code of their own.

#include "madsa/tensor/ops.hpp"

#include <cmath>
#include <optional>
#include <type_traits>
#include <vector>

namespace madsa {

// Valid 1-D convolution over the rows of x (L x d). kernel holds the
// (width x d x f) filter bank flattened to (width*d) x f; bias is 1 x f.
// Returns the pre-activation (L - width + 1) x f.
template <typename Scalar>
Var<Scalar> conv1d(const Var<Scalar>& x, const Var<Scalar>& kernel, const Var<Scalar>& bias, Index width) {
  if (kernel.rows() != width * x.cols()) {
    throw DimensionError("conv1d: kernel has " + std::to_string(kernel.rows()) + " rows, expected " +
                         std::to_string(width * x.cols()));
  }
  return add_row(matmul(windows(x, width), kernel), bias);
}

template <typename Scalar>
struct AttentionPoolWeights {
  Var<Scalar> proj;   // d x a
  Var<Scalar> bias;   // 1 x a
  Var<Scalar> query;  // a x 1
};

template <typename Scalar>
struct AttentionPoolResult {
  Var<Scalar> pooled;  // 1 x d
  Var<Scalar> alpha;   // 1 x n
};

// Weighted sum of the rows of c. The weights are a softmax over the scores
// tanh(c_i proj + bias) . query. Passing forced_alpha bypasses the scoring.
template <typename Scalar>
AttentionPoolResult<Scalar> attention_pool(const Var<Scalar>& c, const AttentionPoolWeights<Scalar>& w,
                                           const std::optional<Matrix<std::type_identity_t<Scalar>>>& forced_alpha =
                                               std::nullopt) {
  if (c.rows() == 0) throw DimensionError("attention_pool: empty input");
  Var<Scalar> alpha;
  if (forced_alpha) {
    if (forced_alpha->rows() != 1 || forced_alpha->cols() != c.rows()) {
      throw DimensionError("attention_pool: forced alpha must be 1 x n");
    }
    alpha = c.tape()->constant(*forced_alpha);
  } else {
    Var<Scalar> scores = matmul(tanh(add_row(matmul(c, w.proj), w.bias)), w.query);
    alpha = softmax_rows(transpose(scores));
  }
  return {matmul(alpha, c), alpha};
}

// softmax(q k^T / sqrt(d_k)) v
template <typename Scalar>
Var<Scalar> scaled_dot_attention(const Var<Scalar>& q, const Var<Scalar>& k, const Var<Scalar>& v) {
  if (q.cols() == 0 || k.cols() == 0) throw DimensionError("scaled_dot_attention: d_k is zero");
  if (q.cols() != k.cols()) throw DimensionError("scaled_dot_attention: query and key widths differ");
  if (k.rows() != v.rows()) throw DimensionError("scaled_dot_attention: key and value row counts differ");
  const Scalar inv = Scalar(1) / std::sqrt(static_cast<Scalar>(k.cols()));
  return matmul(softmax_rows(scale(matmul(q, transpose(k)), inv)), v);
}

// Gate layout along the 4u columns: input, forget, candidate, output.
template <typename Scalar>
struct LstmWeights {
  Var<Scalar> input;      // d x 4u
  Var<Scalar> recurrent;  // u x 4u
  Var<Scalar> bias;       // 1 x 4u
};

template <typename Scalar>
struct LstmState {
  Var<Scalar> h;  // 1 x u
  Var<Scalar> c;  // 1 x u
};

namespace detail {

// Gate nonlinearities and cell update as one tape node with a hand-written
// backward. Output is [h | c], 1 x 2u.
template <typename Scalar>
Var<Scalar> lstm_cell(const Var<Scalar>& pre, const Var<Scalar>& c_prev, Index u) {
  using Row = Eigen::Array<Scalar, 1, Eigen::Dynamic>;
  auto sig = [](const Row& x) -> Row { return Scalar(1) / (Scalar(1) + (-x).exp()); };
  const auto& a = pre.value();
  const Row i = sig(a.block(0, 0, 1, u).array());
  const Row f = sig(a.block(0, u, 1, u).array());
  const Row g = a.block(0, 2 * u, 1, u).array().tanh();
  const Row o = sig(a.block(0, 3 * u, 1, u).array());
  const Row cp = c_prev.value().array();
  const Row c = f * cp + i * g;
  const Row tc = c.tanh();
  Matrix<Scalar> out(1, 2 * u);
  out.block(0, 0, 1, u) = (o * tc).matrix();
  out.block(0, u, 1, u) = c.matrix();
  return pre.tape()->record(std::move(out), {pre, c_prev},
                            [pre, c_prev, u, i, f, g, o, cp, tc](Tape<Scalar>& t, const Matrix<Scalar>& grad) {
                              const Row gh = grad.block(0, 0, 1, u).array();
                              const Row dc = grad.block(0, u, 1, u).array() + gh * o * (Scalar(1) - tc.square());
                              Matrix<Scalar> da(1, 4 * u);
                              da.block(0, 0, 1, u) = (dc * g * i * (Scalar(1) - i)).matrix();
                              da.block(0, u, 1, u) = (dc * cp * f * (Scalar(1) - f)).matrix();
                              da.block(0, 2 * u, 1, u) = (dc * i * (Scalar(1) - g.square())).matrix();
                              da.block(0, 3 * u, 1, u) = (gh * tc * o * (Scalar(1) - o)).matrix();
                              t.accumulate(pre, da);
                              t.accumulate(c_prev, (dc * f).matrix());
                            });
}

template <typename Scalar>
LstmState<Scalar> lstm_gates(const Var<Scalar>& pre, const Var<Scalar>& c_prev, Index u) {
  Var<Scalar> hc = lstm_cell(pre, c_prev, u);
  return {slice_cols(hc, 0, u), slice_cols(hc, u, u)};
}

template <typename Scalar>
Index lstm_units(const LstmWeights<Scalar>& w) {
  const Index u = w.recurrent.rows();
  if (w.recurrent.cols() != 4 * u || w.input.cols() != 4 * u || w.bias.rows() != 1 || w.bias.cols() != 4 * u) {
    throw DimensionError("lstm: weight shapes disagree on unit count");
  }
  return u;
}

}  // namespace detail

template <typename Scalar>
LstmState<Scalar> lstm_step(const Var<Scalar>& x, const LstmState<Scalar>& prev, const LstmWeights<Scalar>& w) {
  const Index u = detail::lstm_units(w);
  if (x.rows() != 1 || x.cols() != w.input.rows()) throw DimensionError("lstm_step: input width mismatch");
  if (prev.h.cols() != u || prev.c.cols() != u) throw DimensionError("lstm_step: state width mismatch");
  Var<Scalar> pre = add(add(matmul(x, w.input), matmul(prev.h, w.recurrent)), w.bias);
  return detail::lstm_gates(pre, prev.c, u);
}

template <typename Scalar>
struct LstmSequence {
  Var<Scalar> hidden;  // n x u, row t is h_t
  LstmState<Scalar> last;
};

// Runs the cell over every row of xs. Equivalent to chaining lstm_step, but
// the input projection is done as one matrix product.
template <typename Scalar>
LstmSequence<Scalar> lstm_sequence(const Var<Scalar>& xs, const LstmState<Scalar>& init, const LstmWeights<Scalar>& w) {
  const Index u = detail::lstm_units(w);
  if (xs.cols() != w.input.rows()) throw DimensionError("lstm_sequence: input width mismatch");
  if (xs.rows() == 0) throw DimensionError("lstm_sequence: empty sequence");
  Var<Scalar> projected = add_row(matmul(xs, w.input), w.bias);
  LstmState<Scalar> state = init;
  std::vector<Var<Scalar>> hs;
  hs.reserve(static_cast<std::size_t>(xs.rows()));
  for (Index t = 0; t < xs.rows(); ++t) {
    Var<Scalar> pre = add(row(projected, t), matmul(state.h, w.recurrent));
    state = detail::lstm_gates(pre, state.c, u);
    hs.push_back(state.h);
  }
  return {concat_rows(hs), state};
}

template <typename Scalar>
LstmState<Scalar> lstm_zero_state(Tape<Scalar>& tape, Index units) {
  return {tape.constant(Matrix<Scalar>::Zero(1, units)), tape.constant(Matrix<Scalar>::Zero(1, units))};
}

}  // namespace madsa
