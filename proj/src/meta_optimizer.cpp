#include "metadapt/meta_optimizer.hpp"

#include <cmath>

#include "metadapt/errors.hpp"
#include "metadapt/model_adapter.hpp"
#include "metadapt/ops.hpp"

namespace metadapt {

namespace {

Tensor batch_row(const Tensor& batch, std::size_t row) {
  std::size_t d = batch.dim(1);
  return Tensor::vector(std::vector<double>(batch.data() + row * d, batch.data() + (row + 1) * d));
}

/// Inverted predictions over the test window for the given model weights.
Tensor inverted_predictions(const DataAdapter& adapter, const ParamSet& psi,
                            const ForecastModel& model, const ParamSet& weights,
                            const Tensor& adapted_features, const Tensor& raw_features) {
  Tensor intermediate = model.predict(weights, adapted_features);
  Tensor out = Tensor::zeros_like(intermediate);
  for (std::size_t s = 0; s < intermediate.numel(); ++s) {
    out[s] = adapter.invert_prediction(psi, batch_row(raw_features, s), intermediate[s]);
  }
  return out;
}

double regularizer_loss(const DataAdapter& adapter, const ParamSet& psi,
                        const Tensor& adapted_train_features, const Tensor& raw_train_labels) {
  const std::size_t rows = raw_train_labels.numel();
  double acc = 0.0;
  for (std::size_t s = 0; s < rows; ++s) {
    double adapted = adapter.adapt_label(psi, batch_row(adapted_train_features, s),
                                         raw_train_labels[s]);
    double d = adapted - raw_train_labels[s];
    acc += d * d;
  }
  return acc / static_cast<double>(rows);
}

void validate_task(const TaskData& task) {
  if (task.test_labels.numel() == 0) throw DataError("test_loss: empty test set");
  if (task.train_labels.numel() == 0) throw DataError("test_loss: empty train set");
}

}  // namespace

MetaLossBreakdown test_loss(const DataAdapter& adapter, const ParamSet& psi,
                            const ForecastModel& model, const ParamSet& theta,
                            const TaskData& task, const MetaOptConfig& config,
                            const ParamSet* phi_for_adaptive) {
  validate_task(task);
  AdaptedTestFeatures adapted_test = adapt_test_features(adapter, psi, task.test_features);
  AdaptedTestFeatures adapted_train = adapt_test_features(adapter, psi, task.train_features);

  MetaLossBreakdown out;
  Tensor predictions = inverted_predictions(adapter, psi, model, theta, adapted_test.features,
                                            task.test_features);
  out.l_mse = mse(predictions, task.test_labels);
  out.l_reg = regularizer_loss(adapter, psi, adapted_train.features, task.train_labels);
  out.l_test = out.l_mse + config.alpha * out.l_reg;

  if (config.reg_mode == RegMode::Adaptive) {
    if (!phi_for_adaptive) {
      throw ConfigError("adaptive regularization requires the pre-update weights");
    }
    Tensor phi_predictions = inverted_predictions(adapter, psi, model, *phi_for_adaptive,
                                                  adapted_test.features, task.test_features);
    double l_mse_phi = mse(phi_predictions, task.test_labels);
    out.l_test_at_phi = l_mse_phi + config.alpha * out.l_reg;
    out.adaptive_coefficient = (*out.l_test_at_phi - out.l_test) / (2.0 * config.sigma * config.sigma);
  }
  return out;
}

TaskGradients evaluate_task(const DataAdapter& adapter, const ParamSet& psi,
                            const ForecastModel& model, const ParamSet& theta,
                            const TaskData& task, const MetaOptConfig& config,
                            const ParamSet* phi_for_adaptive) {
  validate_task(task);
  TaskGradients out;
  out.theta_grads = ParamSet::zeros_like(theta);
  out.psi_grads_mse = ParamSet::zeros_like(psi);
  out.psi_grads_reg = ParamSet::zeros_like(psi);

  const std::size_t test_rows = task.test_labels.numel();
  const std::size_t train_rows = task.train_labels.numel();
  const std::size_t d = task.test_features.dim(1);

  // Error path: psi -> adapted test features -> model(theta) -> inverse map.
  AdaptedTestFeatures adapted_test = adapt_test_features(adapter, psi, task.test_features);
  Tensor intermediate = model.predict(theta, adapted_test.features);
  Tensor predictions = Tensor::zeros({test_rows});
  for (std::size_t s = 0; s < test_rows; ++s) {
    predictions[s] = adapter.invert_prediction(psi, batch_row(task.test_features, s),
                                               intermediate[s]);
  }
  out.losses.l_mse = mse(predictions, task.test_labels);

  Tensor d_pred = mse_backward(predictions, task.test_labels);
  Tensor d_intermediate = Tensor::zeros({test_rows});
  for (std::size_t s = 0; s < test_rows; ++s) {
    double dmid = 0.0;
    adapter.invert_prediction_backward(psi, batch_row(task.test_features, s), intermediate[s],
                                       d_pred[s], out.psi_grads_mse, &dmid, nullptr);
    d_intermediate[s] = dmid;
  }
  auto [theta_grads, d_adapted] = model.backward(theta, adapted_test.features, d_intermediate);
  out.theta_grads = std::move(theta_grads);
  for (std::size_t s = 0; s < test_rows; ++s) {
    Tensor upstream = Tensor::vector(std::vector<double>(d_adapted.data() + s * d,
                                                         d_adapted.data() + (s + 1) * d));
    adapter.adapt_feature_backward(psi, batch_row(task.test_features, s), upstream,
                                   out.psi_grads_mse, nullptr);
  }

  // Regularizer path: keeps adapted labels near the originals. The label
  // gate reads the adapted feature here, so its gradient also reaches the
  // feature heads through that input.
  AdaptedTestFeatures adapted_train = adapt_test_features(adapter, psi, task.train_features);
  double reg_acc = 0.0;
  for (std::size_t s = 0; s < train_rows; ++s) {
    Tensor gate_input = batch_row(adapted_train.features, s);
    double y = task.train_labels[s];
    double adapted = adapter.adapt_label(psi, gate_input, y);
    double err = adapted - y;
    reg_acc += err * err;

    double upstream = 2.0 * err / static_cast<double>(train_rows);
    Tensor d_gate_input = Tensor::zeros({d});
    adapter.adapt_label_backward(psi, gate_input, y, upstream, out.psi_grads_reg, &d_gate_input);
    adapter.adapt_feature_backward(psi, batch_row(task.train_features, s), d_gate_input,
                                   out.psi_grads_reg, nullptr);
  }
  out.losses.l_reg = reg_acc / static_cast<double>(train_rows);
  out.losses.l_test = out.losses.l_mse + config.alpha * out.losses.l_reg;

  if (config.reg_mode == RegMode::Adaptive) {
    if (!phi_for_adaptive) {
      throw ConfigError("adaptive regularization requires the pre-update weights");
    }
    Tensor phi_predictions = inverted_predictions(adapter, psi, model, *phi_for_adaptive,
                                                  adapted_test.features, task.test_features);
    double l_mse_phi = mse(phi_predictions, task.test_labels);
    out.losses.l_test_at_phi = l_mse_phi + config.alpha * out.losses.l_reg;
    out.losses.adaptive_coefficient =
        (*out.losses.l_test_at_phi - out.losses.l_test) / (2.0 * config.sigma * config.sigma);
  }
  return out;
}

void MetaOptimizer::reset_states(const ParamSet& phi_shape, const ParamSet& psi_shape) {
  phi_state_ = AdamState::init(phi_shape);
  psi_state_ = AdamState::init(psi_shape);
}

ParamSet MetaOptimizer::update_model_adapter(const ParamSet& phi, const ParamSet& theta_grads) {
  ParamSet::require_compatible(phi, theta_grads, "update_model_adapter");
  auto [updated, state] = adam_step(phi, theta_grads, phi_state_, config_.eta_phi);
  phi_state_ = std::move(state);
  return updated;
}

ParamSet MetaOptimizer::update_data_adapter(const DataAdapter& adapter, const ParamSet& psi,
                                            const TaskGradients& grads,
                                            const AdapterGradMask& mask) {
  ParamSet::require_compatible(psi, grads.psi_grads_mse, "update_data_adapter");
  if (config_.reg_mode == RegMode::Adaptive && !grads.losses.adaptive_coefficient) {
    throw ConfigError("adaptive regularization requires the pre-update loss to be computed");
  }

  ParamSet combined = grads.psi_grads_mse.clone();
  auto c_it = combined.begin();
  auto r_it = grads.psi_grads_reg.begin();
  for (; c_it != combined.end(); ++c_it, ++r_it) {
    const std::string& name = c_it->first;
    double weight = config_.alpha;
    if (config_.reg_mode == RegMode::Adaptive && DataAdapter::is_label_head_entry(name)) {
      weight = *grads.losses.adaptive_coefficient;
    }
    auto& dst = c_it->second.values();
    const auto& reg = r_it->second.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * reg[i];

    bool feature_entry = DataAdapter::is_feature_entry(name);
    if ((feature_entry && !mask.features) || (!feature_entry && !mask.labels)) {
      for (double& v : dst) v = 0.0;
    }
  }

  auto [updated, state] = adam_step(psi, combined, psi_state_, config_.eta_psi);
  psi_state_ = std::move(state);
  adapter.project_gamma(updated);
  return updated;
}

Tensor PsiMetaLossMap::forward(const ParamSet& psi, const Tensor& input) const {
  (void)input;
  MetaOptConfig config;
  config.alpha = alpha_;
  config.reg_mode = RegMode::Fixed;
  MetaLossBreakdown losses = test_loss(adapter_, psi, model_, theta_, task_, config, nullptr);
  return Tensor::scalar(losses.l_test);
}

std::pair<ParamSet, Tensor> PsiMetaLossMap::backward(const ParamSet& psi, const Tensor& input,
                                                     const Tensor& upstream) const {
  MetaOptConfig config;
  config.alpha = alpha_;
  config.reg_mode = RegMode::Fixed;
  TaskGradients grads = evaluate_task(adapter_, psi, model_, theta_, task_, config, nullptr);
  ParamSet combined = grads.psi_grads_mse.clone();
  combined.axpy(alpha_, grads.psi_grads_reg);
  combined.scale(upstream[0]);
  return {std::move(combined), Tensor::zeros_like(input)};
}

}  // namespace metadapt
