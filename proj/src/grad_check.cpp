#include "metadapt/grad_check.hpp"

#include <cmath>
#include <limits>

#include "metadapt/errors.hpp"

namespace metadapt {

namespace {
double weighted_sum(const Tensor& out, const Tensor& upstream) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) acc += out[i] * upstream[i];
  return acc;
}
}  // namespace

double finite_difference_check(const DifferentiableMap& map, const ParamSet& params,
                               const Tensor& input, double eps) {
  if (eps <= 0.0) throw ConfigError("finite_difference_check: eps must be positive");

  // Varied deterministic weights: a constant upstream is blind to any map
  // whose outputs satisfy an affine constraint (softmax outputs sum to 1).
  Tensor base = map.forward(params, input);
  Tensor upstream = Tensor::zeros_like(base);
  for (std::size_t i = 0; i < upstream.numel(); ++i) {
    upstream[i] = 1.0 + 0.5 * static_cast<double>((i * 2654435761ULL % 97)) / 97.0;
  }

  auto [analytic, input_grad] = map.backward(params, input, upstream);
  (void)input_grad;

  double worst = 0.0;
  ParamSet probe = params.clone();
  auto a_it = analytic.begin();
  for (auto p_it = probe.begin(); p_it != probe.end(); ++p_it, ++a_it) {
    auto& values = p_it->second.values();
    const auto& grads = a_it->second.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      double saved = values[i];
      values[i] = saved + eps;
      double up = weighted_sum(map.forward(probe, input), upstream);
      values[i] = saved - eps;
      double down = weighted_sum(map.forward(probe, input), upstream);
      values[i] = saved;

      double numeric = (up - down) / (2.0 * eps);
      double analytic_v = grads[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic_v)) {
        return std::numeric_limits<double>::infinity();
      }
      double rel = std::abs(analytic_v - numeric) / std::max(1e-12, std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace metadapt
