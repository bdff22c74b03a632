#pragma once

#include "madsa/tensor/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace madsa {

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay: the decay shrinks the weights directly
// and never enters the moment estimates.
template <typename Scalar>
class AdamW {
 public:
  AdamW(ParameterSet<Scalar>& params, AdamWConfig config) : config_(config) {
    if (!(config.lr > 0) || !(config.eps > 0) || config.beta1 < 0 || config.beta1 >= 1 || config.beta2 < 0 ||
        config.beta2 >= 1 || config.weight_decay < 0) {
      throw ConfigError("invalid AdamW configuration");
    }
    for (auto& e : params.entries()) {
      if (!e.tensor.requires_grad()) continue;
      slots_.push_back({&e.name, &e.tensor, Matrix<Scalar>::Zero(e.tensor.value().rows(), e.tensor.value().cols()),
                        Matrix<Scalar>::Zero(e.tensor.value().rows(), e.tensor.value().cols())});
    }
  }

  // Applies one update from the tensors' grad buffers (absent grad counts as
  // zero). A non-finite gradient aborts the step before anything changes.
  void step() {
    for (const auto& s : slots_) {
      if (s.param->has_grad() && !s.param->grad().allFinite()) {
        throw NumericError("non-finite gradient in parameter '" + *s.name + "' at step " + std::to_string(step_ + 1));
      }
    }
    ++step_;
    const Scalar lr = static_cast<Scalar>(config_.lr);
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    const Scalar bc1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step_));
    const Scalar bc2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step_));
    const Scalar eps = static_cast<Scalar>(config_.eps);
    const Scalar decay = Scalar(1) - lr * static_cast<Scalar>(config_.weight_decay);
    for (auto& s : slots_) {
      Matrix<Scalar>& p = s.param->value();
      p *= decay;
      if (!s.param->has_grad()) {
        s.m *= b1;
        s.v *= b2;
        continue;
      }
      const Matrix<Scalar>& g = s.param->grad();
      s.m = b1 * s.m + (Scalar(1) - b1) * g;
      s.v = b2 * s.v + (Scalar(1) - b2) * g.cwiseProduct(g);
      p.array() -= lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + eps);
    }
  }

  std::uint64_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

  const Matrix<Scalar>& first_moment(std::size_t i) const { return slots_.at(i).m; }
  const Matrix<Scalar>& second_moment(std::size_t i) const { return slots_.at(i).v; }

 private:
  struct Slot {
    const std::string* name;
    Tensor<Scalar>* param;
    Matrix<Scalar> m;
    Matrix<Scalar> v;
  };

  AdamWConfig config_;
  std::vector<Slot> slots_;
  std::uint64_t step_ = 0;
};

}  // namespace madsa
