#include "metadapt/optim.hpp"

#include <cmath>

#include "metadapt/errors.hpp"

namespace metadapt {

AdamState AdamState::init(const ParamSet& shape, AdamConfig config) {
  AdamState state;
  state.first_moment = ParamSet::zeros_like(shape);
  state.second_moment = ParamSet::zeros_like(shape);
  state.config = config;
  return state;
}

ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double eta) {
  if (eta < 0.0) throw ConfigError("sgd_step: negative learning rate");
  ParamSet::require_compatible(params, grads, "sgd_step");
  ParamSet out = params.clone();
  out.axpy(-eta, grads);
  return out;
}

std::pair<ParamSet, AdamState> adam_step(const ParamSet& params, const ParamSet& grads,
                                         const AdamState& state, double eta) {
  ParamSet::require_compatible(params, grads, "adam_step");
  ParamSet::require_compatible(params, state.first_moment, "adam_step state");

  AdamState next = state;
  next.step_count = state.step_count + 1;
  const double b1 = state.config.beta1;
  const double b2 = state.config.beta2;
  const double eps = state.config.epsilon;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(next.step_count));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(next.step_count));

  ParamSet out = params.clone();
  auto p_it = out.begin();
  auto g_it = grads.begin();
  auto m_it = next.first_moment.begin();
  auto v_it = next.second_moment.begin();
  for (; p_it != out.end(); ++p_it, ++g_it, ++m_it, ++v_it) {
    auto& p = p_it->second.values();
    const auto& g = g_it->second.values();
    auto& m = m_it->second.values();
    auto& v = v_it->second.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      double m_hat = m[i] / bias1;
      double v_hat = v[i] / bias2;
      p[i] -= eta * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
  return {std::move(out), std::move(next)};
}

}  // namespace metadapt
