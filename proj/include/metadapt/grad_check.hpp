#pragma once

#include <utility>

#include "metadapt/param_set.hpp"
#include "metadapt/tensor.hpp"

namespace metadapt {

/// Behavioral contract for anything with analytic gradients: a deterministic
/// forward over (params, input) and a backward returning parameter gradients
/// plus the input gradient for a given upstream cotangent.
class DifferentiableMap {
 public:
  virtual ~DifferentiableMap() = default;

  virtual Tensor forward(const ParamSet& params, const Tensor& input) const = 0;

  /// Returns {d(upstream . output)/dparams, d(upstream . output)/dinput}.
  virtual std::pair<ParamSet, Tensor> backward(const ParamSet& params, const Tensor& input,
                                               const Tensor& upstream) const = 0;
};

/// Central finite differences over every parameter coordinate against the
/// analytic backward (upstream = all ones). Returns the max over coordinates
/// of |analytic - numeric| / max(1e-12, |numeric|); NaN anywhere reports +inf.
double finite_difference_check(const DifferentiableMap& map, const ParamSet& params,
                               const Tensor& input, double eps);

}  // namespace metadapt
