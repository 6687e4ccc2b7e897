#include "metadapt/model_adapter.hpp"

#include "metadapt/errors.hpp"
#include "metadapt/optim.hpp"

namespace metadapt {

AdaptedTrainSet adapt_train_set(const DataAdapter& adapter, const ParamSet& psi,
                                const Tensor& features, const Tensor& labels) {
  if (features.rank() != 2 || features.dim(0) != labels.numel() || labels.numel() == 0) {
    throw DataError("adapt_train_set: features " + features.shape_str() + " vs labels " +
                    labels.shape_str());
  }
  const std::size_t rows = features.dim(0), d = features.dim(1);
  AdaptedTrainSet out{Tensor::zeros({rows, d}), Tensor::zeros({rows})};
  for (std::size_t s = 0; s < rows; ++s) {
    Tensor x = Tensor::vector(std::vector<double>(features.data() + s * d,
                                                  features.data() + (s + 1) * d));
    Tensor adapted = adapter.adapt_feature(psi, x);
    std::copy(adapted.data(), adapted.data() + d, out.features.data() + s * d);
    out.labels[s] = adapter.adapt_label(psi, x, labels[s]);
  }
  return out;
}

AdaptedTestFeatures adapt_test_features(const DataAdapter& adapter, const ParamSet& psi,
                                        const Tensor& features) {
  if (features.rank() != 2 || features.dim(0) == 0) {
    throw DataError("adapt_test_features: empty or non-batch features " + features.shape_str());
  }
  const std::size_t rows = features.dim(0), d = features.dim(1);
  AdaptedTestFeatures out{Tensor::zeros({rows, d})};
  for (std::size_t s = 0; s < rows; ++s) {
    Tensor x = Tensor::vector(std::vector<double>(features.data() + s * d,
                                                  features.data() + (s + 1) * d));
    Tensor adapted = adapter.adapt_feature(psi, x);
    std::copy(adapted.data(), adapted.data() + d, out.features.data() + s * d);
  }
  return out;
}

LowerLevelResult lower_level_update(const ModelAdapterState& ma, const ForecastModel& model,
                                    const AdaptedTrainSet& adapted_train) {
  if (adapted_train.labels.numel() == 0) throw DataError("lower_level_update: empty train set");
  if (ma.inner_steps < 1) throw ConfigError("lower_level_update: inner_steps must be >= 1");

  auto [loss, grads] = model.loss_and_grads(ma.phi, adapted_train.features, adapted_train.labels);
  ParamSet theta = sgd_step(ma.phi, grads, ma.eta_theta);
  for (int step = 1; step < ma.inner_steps; ++step) {
    auto [loss_k, grads_k] = model.loss_and_grads(theta, adapted_train.features, adapted_train.labels);
    (void)loss_k;
    theta = sgd_step(theta, grads_k, ma.eta_theta);
  }
  return {std::move(theta), loss};
}

}  // namespace metadapt
