#pragma once

#include <cstdint>

#include "kpgen/numerics/tensor.hpp"

namespace kpgen {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators laid out like the parameters.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const ParamStore& params, AdamConfig config);

/// One bias-corrected Adam update:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
///   theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state);

}  // namespace kpgen
