#pragma once

// Central finite-difference oracle for tape gradients. It only evaluates the
// forward pass, so it stays independent of every backward rule it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "kpgen/numerics/tape.hpp"
#include "kpgen/numerics/tensor.hpp"

namespace kpgen::testing {

using LossBuilder = std::function<Var(Tape&, const ParamStore&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[index]"
  std::size_t checked = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero up
// to round-off from dominating the ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-5) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

inline double eval_loss(const LossBuilder& build, const ParamStore& params) {
  Tape tape;
  Var loss = build(tape, params);
  return tape.value(loss)[0];
}

inline Gradients analytic_gradients(const LossBuilder& build, const ParamStore& params) {
  Gradients grads = params.zeros_like();
  Tape tape;
  Var loss = build(tape, params);
  tape.backward(loss, grads);
  return grads;
}

// Perturbs `params` in place (restoring every value), so builders may refer to
// an object that owns the store rather than to the store they are handed.
inline GradCheckResult check_gradients_in_place(const LossBuilder& build, ParamStore& params,
                                                double step = 1e-5) {
  GradCheckResult result;
  Gradients grads = analytic_gradients(build, params);
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto vals = params[s].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + step;
      const double up = eval_loss(build, params);
      vals[i] = orig - step;
      const double down = eval_loss(build, params);
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(grads[s][i], numeric);
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = params.name(s) + "[" + std::to_string(i) + "] analytic " +
                       std::to_string(grads[s][i]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return result;
}

inline GradCheckResult check_gradients(const LossBuilder& build, ParamStore params,
                                       double step = 1e-5) {
  return check_gradients_in_place(build, params, step);
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double range = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> unif(-range, range);
  for (double& v : t.values()) v = unif(rng);
  return t;
}

}  // namespace kpgen::testing
