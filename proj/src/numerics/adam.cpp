#include "kpgen/numerics/adam.hpp"

#include <cmath>
#include <string>

#include "kpgen/errors.hpp"

namespace kpgen {

AdamState make_adam_state(const ParamStore& params, AdamConfig config) {
  if (!(config.learning_rate > 0.0) || !(config.epsilon > 0.0) || config.beta1 < 0.0 ||
      config.beta1 >= 1.0 || config.beta2 < 0.0 || config.beta2 >= 1.0) {
    throw ConfigError("adam: invalid hyperparameters");
  }
  AdamState state;
  state.config = config;
  state.first_moment = params.zeros_like();
  state.second_moment = params.zeros_like();
  return state;
}

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ConfigError("adam_step: slot count mismatch");
  }
  for (std::size_t s = 0; s < params.size(); ++s) {
    const Shape& shape = params[s].shape();
    if (grads[s].shape() != shape || state.first_moment[s].shape() != shape ||
        state.second_moment[s].shape() != shape) {
      throw ConfigError("adam_step: shape mismatch for " + params.name(s));
    }
  }

  const auto& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t s = 0; s < params.size(); ++s) {
    auto theta = params[s].values();
    auto g = grads[s].values();
    auto m = state.first_moment[s].values();
    auto v = state.second_moment[s].values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace kpgen
