#pragma once

#include <cstdint>
#include <utility>

#include "metadapt/param_set.hpp"

namespace metadapt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-ParamSet Adam accumulators. Owned by exactly one training loop.
struct AdamState {
  std::int64_t step_count = 0;
  ParamSet first_moment;
  ParamSet second_moment;
  AdamConfig config;

  static AdamState init(const ParamSet& shape, AdamConfig config = {});
};

/// params - eta * grads; inputs unmodified.
ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double eta);

/// Standard Adam with bias correction. Pure: returns the updated copies.
std::pair<ParamSet, AdamState> adam_step(const ParamSet& params, const ParamSet& grads,
                                         const AdamState& state, double eta);

}  // namespace metadapt
