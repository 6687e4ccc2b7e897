#pragma once

#include "metadapt/data_adapter.hpp"
#include "metadapt/model.hpp"
#include "metadapt/param_set.hpp"

namespace metadapt {

/// Adapted incremental set: features and labels both transformed.
struct AdaptedTrainSet {
  Tensor features;  // [S x D]
  Tensor labels;    // [S]
};

/// Adapted test features. Deliberately label-free: this is the only object
/// the inference step receives, so test labels cannot leak into predictions.
struct AdaptedTestFeatures {
  Tensor features;  // [S x D]
};

AdaptedTrainSet adapt_train_set(const DataAdapter& adapter, const ParamSet& psi,
                                const Tensor& features, const Tensor& labels);

AdaptedTestFeatures adapt_test_features(const DataAdapter& adapter, const ParamSet& psi,
                                        const Tensor& features);

/// Slow weights and the lower-level step size.
struct ModelAdapterState {
  ParamSet phi;
  double eta_theta = 0.001;
  int inner_steps = 1;  // the method uses exactly one; knob kept for experiments
};

struct LowerLevelResult {
  ParamSet theta;
  double train_loss;  // loss at the initial weights, before the step
};

/// theta = phi - eta_theta * grad L_train(phi) (plain gradient step repeated
/// inner_steps times). phi itself is never mutated.
LowerLevelResult lower_level_update(const ModelAdapterState& ma, const ForecastModel& model,
                                    const AdaptedTrainSet& adapted_train);

}  // namespace metadapt
