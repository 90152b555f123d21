#ifndef HBGNN_OPTIM_HPP_
#define HBGNN_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hbgnn/error.hpp"
#include "hbgnn/params.hpp"
#include "hbgnn/tape.hpp"

namespace hbgnn {

/// AMSGrad hyperparameters. Decay is decoupled: it subtracts
/// lr * weight_decay * theta directly rather than entering the gradient.
struct AmsgradConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

/// Plain RMSE of two equal-length sequences, accumulated left to right.
template <typename S>
double rmse_value(const std::vector<S>& predictions, const std::vector<S>& targets) {
  if (predictions.empty()) throw DomainError("rmse: empty input");
  if (predictions.size() != targets.size()) {
    throw DimensionError("rmse: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
  }
  double acc = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = double(predictions[i]) - double(targets[i]);
    acc += d * d;
  }
  return std::sqrt(acc / double(predictions.size()));
}

/// RMSE as a differentiable tape node over a prediction vector and constant
/// targets; at exactly zero error the gradient is zero.
template <typename S>
Var rmse(Tape<S>& tape, Var predictions, const Tensor<S>& targets) {
  return tape.rmse(predictions, tape.constant(targets));
}

/// Per-parameter AMSGrad moments plus the step counter. The running second-
/// moment maximum never decreases, which is what distinguishes AMSGrad from
/// Adam. Moments are stored in parameter order, same as the ParameterSet.
template <typename S>
class AmsgradState {
 public:
  AmsgradState(const ParameterSet<S>& params, const AmsgradConfig& cfg) : cfg_(cfg) {
    if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
      throw ConfigError("amsgrad: betas must lie in (0, 1)");
    }
    if (cfg.lr < 0.0 || cfg.eps <= 0.0 || cfg.weight_decay < 0.0) {
      throw ConfigError("amsgrad: lr/eps/weight_decay out of range");
    }
    slots_.reserve(params.size());
    for (const auto& [name, tensor] : params.items()) {
      Slot s;
      s.name = name;
      s.m = Tensor<S>(tensor.shape);
      s.v = Tensor<S>(tensor.shape);
      s.v_max = Tensor<S>(tensor.shape);
      slots_.push_back(std::move(s));
    }
  }

  const AmsgradConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return step_; }

  /// One update over every parameter. Gradients missing from the map count
  /// as zero. Per element:
  ///   m <- b1*m + (1-b1)*g
  ///   v <- b2*v + (1-b2)*g^2
  ///   v_max <- max(v_max, v)
  ///   theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v_max / (1-b2^t)) + eps)
  ///                 - lr * weight_decay * theta
  void step(ParameterSet<S>& params, const GradientMap<S>& grads) {
    if (params.size() != slots_.size()) {
      throw ContractError("amsgrad: parameter set size changed since construction");
    }
    ++step_;
    const S b1 = S(cfg_.beta1);
    const S b2 = S(cfg_.beta2);
    const S lr = S(cfg_.lr);
    const S eps = S(cfg_.eps);
    const S wd = S(cfg_.weight_decay);
    const S corr1 = S(1) - S(std::pow(cfg_.beta1, double(step_)));
    const S corr2 = S(1) - S(std::pow(cfg_.beta2, double(step_)));

    for (std::size_t p = 0; p < slots_.size(); ++p) {
      Slot& slot = slots_[p];
      auto& [name, theta] = params.items()[p];
      if (name != slot.name) {
        throw ContractError("amsgrad: parameter order changed since construction");
      }
      auto it = grads.find(name);
      const Tensor<S>* g = it == grads.end() ? nullptr : &it->second;
      if (g && !g->same_shape(theta)) {
        throw ContractError("amsgrad: gradient shape mismatch for '" + name + "'");
      }
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const S gi = g ? g->data[i] : S(0);
        slot.m.data[i] = b1 * slot.m.data[i] + (S(1) - b1) * gi;
        slot.v.data[i] = b2 * slot.v.data[i] + (S(1) - b2) * gi * gi;
        if (slot.v.data[i] > slot.v_max.data[i]) slot.v_max.data[i] = slot.v.data[i];
        const S m_hat = slot.m.data[i] / corr1;
        const S v_hat = slot.v_max.data[i] / corr2;
        theta.data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps) + lr * wd * theta.data[i];
      }
    }
  }

  struct Slot {
    std::string name;
    Tensor<S> m;
    Tensor<S> v;
    Tensor<S> v_max;
  };

  const std::vector<Slot>& slots() const { return slots_; }
  std::vector<Slot>& slots() { return slots_; }
  void set_step_count(std::uint64_t s) { step_ = s; }

 private:
  AmsgradConfig cfg_;
  std::vector<Slot> slots_;
  std::uint64_t step_ = 0;
};

}  // namespace hbgnn

#endif  // HBGNN_OPTIM_HPP_
