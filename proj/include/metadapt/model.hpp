#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "metadapt/grad_check.hpp"
#include "metadapt/param_set.hpp"

namespace metadapt {

/// Pluggable differentiable forecast backbone. Models are stateless
/// behavior over explicit ParamSets: the same instance serves every
/// training loop and baseline.
///
/// forward/backward treat the input as a batch [S x D] and produce one
/// prediction per row; row i depends only on row i of the input.
class ForecastModel : public DifferentiableMap {
 public:
  virtual ParamSet init(std::uint64_t seed, std::size_t feature_dim) const = 0;
  virtual std::string name() const = 0;

  Tensor predict(const ParamSet& params, const Tensor& features_batch) const {
    return forward(params, features_batch);
  }

  /// loss = mse(predict(params, X), y); gradients are analytic.
  std::pair<double, ParamSet> loss_and_grads(const ParamSet& params, const Tensor& features_batch,
                                             const Tensor& labels) const;
};

/// Single dense unit: prediction = w . x + b. Used as the hand-checkable
/// oracle backbone in tests.
class LinearModel final : public ForecastModel {
 public:
  ParamSet init(std::uint64_t seed, std::size_t feature_dim) const override;
  std::string name() const override { return "linear"; }
  Tensor forward(const ParamSet& params, const Tensor& input) const override;
  std::pair<ParamSet, Tensor> backward(const ParamSet& params, const Tensor& input,
                                       const Tensor& upstream) const override;
};

/// Dense MLP with tanh hidden layers and a linear scalar head.
/// tanh keeps gradients smooth enough for tight finite-difference checks.
class MlpModel final : public ForecastModel {
 public:
  explicit MlpModel(std::vector<std::size_t> hidden_sizes = {32});

  ParamSet init(std::uint64_t seed, std::size_t feature_dim) const override;
  std::string name() const override { return "mlp"; }
  Tensor forward(const ParamSet& params, const Tensor& input) const override;
  std::pair<ParamSet, Tensor> backward(const ParamSet& params, const Tensor& input,
                                       const Tensor& upstream) const override;

  const std::vector<std::size_t>& hidden_sizes() const { return hidden_sizes_; }

 private:
  std::vector<std::size_t> hidden_sizes_;
};

std::unique_ptr<ForecastModel> make_model(const std::string& backbone,
                                          const std::vector<std::size_t>& hidden_sizes);

}  // namespace metadapt
