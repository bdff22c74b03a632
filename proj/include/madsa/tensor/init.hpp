#pragma once

#include "madsa/tensor/rng.hpp"
#include "madsa/tensor/tensor.hpp"

#include <cmath>

namespace madsa {

// Uniform(-bound, bound) draws, rounded to float precision so freshly built
// models survive a checkpoint round-trip unchanged.
template <typename Scalar>
void init_uniform(Tensor<Scalar>& t, Rng& rng, double bound) {
  auto& v = t.value();
  for (Index i = 0; i < v.size(); ++i) {
    v.data()[i] = static_cast<Scalar>(static_cast<float>(rng.uniform(-bound, bound)));
  }
}

// Glorot-style bound from fan-in and fan-out.
template <typename Scalar>
void init_glorot(Tensor<Scalar>& t, Rng& rng, Index fan_in, Index fan_out) {
  init_uniform(t, rng, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

}  // namespace madsa
