#pragma once

// Primitive differentiable operations. Every op records one node whose
// backward closure pushes the exact vector-Jacobian product to its inputs.

#include "madsa/tensor/rng.hpp"
#include "madsa/tensor/tape.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace madsa {

namespace detail {

inline std::string dims(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

template <typename Scalar>
void same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.tape() != b.tape()) throw ContractError("operands live on different tapes");
}

template <typename Scalar>
void same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + dims(a.rows(), a.cols()) + " vs " +
                         dims(b.rows(), b.cols()));
  }
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dims differ " + detail::dims(a.rows(), a.cols()) + " x " +
                         detail::dims(b.rows(), b.cols()));
  }
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (a.requires_grad()) t.accumulate_product(a, g, b.value().transpose());
    if (b.requires_grad()) t.accumulate_product(b, a.value().transpose(), g);
  });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape("add", a, b);
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape("sub", a, b);
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

// a (n x m) plus the row vector b (1 x m) added to every row.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_tape(a, b);
  if (b.rows() != 1 || b.cols() != a.cols()) {
    throw DimensionError("add_row: bias " + detail::dims(b.rows(), b.cols()) + " for input " +
                         detail::dims(a.rows(), a.cols()));
  }
  Matrix<Scalar> out = a.value().rowwise() + b.value().row(0);
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) t.accumulate(b, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> hadamard(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::same_shape("hadamard", a, b);
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  return a.tape()->record(a.value() * s, {a},
                          [a, s](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(a, g * s); });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  Matrix<Scalar> y = a.value().unaryExpr([](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); });
  return a.tape()->record(y, {a}, [a, y](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g.cwiseProduct(y.cwiseProduct((Scalar(1) - y.array()).matrix())));
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  Matrix<Scalar> y = a.value().array().tanh().matrix();
  return a.tape()->record(y, {a}, [a, y](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g.cwiseProduct((Scalar(1) - y.array().square()).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  Matrix<Scalar> y = a.value().cwiseMax(Scalar(0));
  return a.tape()->record(y, {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, (a.value().array() > Scalar(0)).select(g, Scalar(0)).matrix());
  });
}

// Row-wise softmax; each output row sums to one.
template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a) {
  const Matrix<Scalar>& x = a.value();
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return a.tape()->record(y, {a}, [a, y](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> gy = g.cwiseProduct(y);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = gy.rowwise().sum();
    t.accumulate(a, gy - (y.array().colwise() * dot.array()).matrix());
  });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, Matrix<Scalar>::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& a) {
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

// Column means: (n x m) -> (1 x m).
template <typename Scalar>
Var<Scalar> mean_rows(const Var<Scalar>& a) {
  const Index n = a.rows();
  if (n == 0) throw DimensionError("mean_rows: no rows");
  Matrix<Scalar> out = a.value().colwise().mean();
  return a.tape()->record(std::move(out), {a}, [a, n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(a, g.replicate(n, 1) / static_cast<Scalar>(n));
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  Matrix<Scalar> out = a.value().transpose();
  return a.tape()->record(std::move(out), {a},
                          [a](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(a, g.transpose()); });
}

template <typename Scalar>
Var<Scalar> slice_cols(const Var<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw DimensionError("slice_cols: out of range");
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return a.tape()->record(std::move(out), {a}, [a, start, count](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate_block(a, 0, start, g);
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw DimensionError("slice_rows: out of range");
  Matrix<Scalar> out = a.value().middleRows(start, count);
  return a.tape()->record(std::move(out), {a}, [a, start, count](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate_block(a, start, 0, g);
  });
}

template <typename Scalar>
Var<Scalar> row(const Var<Scalar>& a, Index i) {
  return slice_rows(a, i, 1);
}

template <typename Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    detail::same_tape(parts.front(), p);
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().tape()->record(std::move(out), parts, [parts](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Index off = 0;
    for (const auto& p : parts) {
      const Index c = p.cols();
      if (p.requires_grad()) t.accumulate(p, g.middleCols(off, c));
      off += c;
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    detail::same_tape(parts.front(), p);
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return parts.front().tape()->record(std::move(out), parts, [parts](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Index off = 0;
    for (const auto& p : parts) {
      const Index r = p.rows();
      if (p.requires_grad()) t.accumulate(p, g.middleRows(off, r));
      off += r;
    }
  });
}

// Embedding lookup: output row i is table row ids[i].
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& table, std::span<const int> ids) {
  std::vector<int> idx(ids.begin(), ids.end());
  Matrix<Scalar> out(static_cast<Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.rows()) {
      throw std::out_of_range("gather_rows: id " + std::to_string(idx[i]) + " outside table of " +
                              std::to_string(table.rows()) + " rows");
    }
    out.row(static_cast<Index>(i)) = table.value().row(idx[i]);
  }
  return table.tape()->record(std::move(out), {table}, [table, idx](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    for (std::size_t i = 0; i < idx.size(); ++i) t.accumulate_block(table, idx[i], 0, g.row(static_cast<Index>(i)));
  });
}

// Sliding windows over rows: (L x d) -> ((L - width + 1) x (width * d)), row i
// holding rows i..i+width-1 laid end to end.
template <typename Scalar>
Var<Scalar> windows(const Var<Scalar>& x, Index width) {
  const Index len = x.rows();
  const Index d = x.cols();
  if (width <= 0) throw DimensionError("windows: width must be positive");
  if (len < width) {
    throw DimensionError("input too short: " + std::to_string(len) + " rows for window " + std::to_string(width));
  }
  const Index n = len - width + 1;
  Matrix<Scalar> out(n, width * d);
  for (Index i = 0; i < n; ++i) {
    for (Index w = 0; w < width; ++w) out.block(i, w * d, 1, d) = x.value().row(i + w);
  }
  return x.tape()->record(std::move(out), {x}, [x, width, n, d](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(x.rows(), d);
    for (Index i = 0; i < n; ++i) {
      for (Index w = 0; w < width; ++w) full.row(i + w) += g.block(i, w * d, 1, d);
    }
    t.accumulate(x, full);
  });
}

// Mean over positions of -log softmax(logits)[target]. Positions whose
// target equals ignore_index are excluded; if every position is ignored the
// loss is zero.
template <typename Scalar>
Var<Scalar> nll_loss(const Var<Scalar>& logits, std::span<const int> targets, int ignore_index = -1) {
  const Index T = logits.rows();
  const Index V = logits.cols();
  if (static_cast<Index>(targets.size()) != T) {
    throw DimensionError("nll_loss: " + std::to_string(targets.size()) + " targets for " + std::to_string(T) +
                         " positions");
  }
  std::vector<int> tg(targets.begin(), targets.end());
  Matrix<Scalar> probs(T, V);
  Scalar total = 0;
  Index counted = 0;
  for (Index r = 0; r < T; ++r) {
    const int target = tg[static_cast<std::size_t>(r)];
    const auto x = logits.value().row(r);
    const Scalar m = x.maxCoeff();
    probs.row(r) = (x.array() - m).exp().matrix();
    const Scalar z = probs.row(r).sum();
    probs.row(r) /= z;
    if (target == ignore_index) continue;
    if (target < 0 || target >= V) {
      throw std::out_of_range("nll_loss: target " + std::to_string(target) + " outside vocabulary of " +
                              std::to_string(V));
    }
    total += -(x(target) - m - std::log(z));
    ++counted;
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = counted ? total / static_cast<Scalar>(counted) : Scalar(0);
  return logits.tape()->record(
      std::move(out), {logits}, [logits, tg, probs, counted, ignore_index](Tape<Scalar>& t, const Matrix<Scalar>& g) {
        Matrix<Scalar> d = Matrix<Scalar>::Zero(probs.rows(), probs.cols());
        if (counted == 0) return;
        const Scalar s = g(0, 0) / static_cast<Scalar>(counted);
        for (Index r = 0; r < probs.rows(); ++r) {
          const int target = tg[static_cast<std::size_t>(r)];
          if (target == ignore_index) continue;
          d.row(r) = probs.row(r) * s;
          d(r, target) -= s;
        }
        t.accumulate(logits, d);
      });
}

// Mean squared error against a constant target of the same shape.
template <typename Scalar>
Var<Scalar> mse_loss(const Var<Scalar>& pred, const Matrix<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("mse_loss: prediction " + detail::dims(pred.rows(), pred.cols()) + " vs target " +
                         detail::dims(target.rows(), target.cols()));
  }
  Matrix<Scalar> diff = pred.value() - target;
  const Scalar n = static_cast<Scalar>(diff.size());
  Matrix<Scalar> out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return pred.tape()->record(std::move(out), {pred}, [pred, diff, n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(pred, diff * (Scalar(2) * g(0, 0) / n));
  });
}

// Inverted dropout: kept units are scaled by 1 / (1 - rate) while training;
// identity otherwise.
template <typename Scalar>
Var<Scalar> dropout(const Var<Scalar>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const Scalar keep_scale = Scalar(1) / static_cast<Scalar>(1.0 - rate);
  Matrix<Scalar> mask(x.rows(), x.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? Scalar(0) : keep_scale;
  Matrix<Scalar> out = x.value().cwiseProduct(mask);
  return x.tape()->record(std::move(out), {x}, [x, mask](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(x, g.cwiseProduct(mask));
  });
}

}  // namespace madsa
