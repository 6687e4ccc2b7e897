#pragma once

#include <optional>

#include "metadapt/data_adapter.hpp"
#include "metadapt/grad_check.hpp"
#include "metadapt/model.hpp"
#include "metadapt/optim.hpp"

namespace metadapt {

enum class RegMode { Fixed, Adaptive };

struct MetaOptConfig {
  double alpha = 0.5;     // regularization strength
  double eta_phi = 0.001; // slow-weight learning rate
  double eta_psi = 0.01;  // adapter learning rate
  RegMode reg_mode = RegMode::Fixed;
  double sigma = 1.0;     // adaptive-mode scale
};

struct MetaLossBreakdown {
  double l_mse = 0.0;
  double l_reg = 0.0;
  double l_test = 0.0;  // l_mse + alpha * l_reg
  std::optional<double> l_test_at_phi;         // adaptive mode only
  std::optional<double> adaptive_coefficient;  // (l_test(phi) - l_test(theta)) / (2 sigma^2)
};

/// Raw material of a task: train/test batches with ground-truth labels.
/// Construction implies the task is complete (test labels revealed).
struct TaskData {
  Tensor train_features;  // [S_train x D]
  Tensor train_labels;    // [S_train]
  Tensor test_features;   // [S_test x D]
  Tensor test_labels;     // [S_test]
};

/// Everything the upper-level updates need, computed in one reverse pass:
/// the loss breakdown, the test-loss gradient at theta (applied to phi under
/// the first-order rule), and the adapter gradient split into its error and
/// regularizer components so both weighting modes can combine them.
struct TaskGradients {
  MetaLossBreakdown losses;
  ParamSet theta_grads;
  ParamSet psi_grads_mse;
  ParamSet psi_grads_reg;
};

/// Losses only (no gradients): mean inverted-prediction error over the test
/// window plus the adapted-label regularizer over the train window.
MetaLossBreakdown test_loss(const DataAdapter& adapter, const ParamSet& psi,
                            const ForecastModel& model, const ParamSet& theta,
                            const TaskData& task, const MetaOptConfig& config,
                            const ParamSet* phi_for_adaptive = nullptr);

TaskGradients evaluate_task(const DataAdapter& adapter, const ParamSet& psi,
                            const ForecastModel& model, const ParamSet& theta,
                            const TaskData& task, const MetaOptConfig& config,
                            const ParamSet* phi_for_adaptive = nullptr);

/// Ablation switches: a disabled side keeps its identity initialization by
/// zeroing its gradient block before the optimizer step.
struct AdapterGradMask {
  bool features = true;
  bool labels = true;
};

/// Owns the upper-level Adam states. States persist across the tasks of one
/// pass and are reset at the start of each offline epoch and of the online
/// phase.
class MetaOptimizer {
 public:
  explicit MetaOptimizer(MetaOptConfig config) : config_(config) {}

  const MetaOptConfig& config() const { return config_; }

  void reset_states(const ParamSet& phi_shape, const ParamSet& psi_shape);

  /// phi <- Adam step along the test-loss gradient evaluated at theta.
  ParamSet update_model_adapter(const ParamSet& phi, const ParamSet& theta_grads);

  /// psi <- Adam step along the mode-weighted adapter gradient, followed by
  /// the invertibility projection on the label scales.
  ParamSet update_data_adapter(const DataAdapter& adapter, const ParamSet& psi,
                               const TaskGradients& grads, const AdapterGradMask& mask = {});

  const AdamState& phi_state() const { return phi_state_; }
  const AdamState& psi_state() const { return psi_state_; }

 private:
  MetaOptConfig config_;
  AdamState phi_state_;
  AdamState psi_state_;
};

/// The fixed-mode adapter meta-loss l_mse + alpha * l_reg as a
/// DifferentiableMap over psi with theta frozen, so the meta-gradient can be
/// finite-difference checked like any other primitive. The input tensor is
/// ignored (the task is captured).
class PsiMetaLossMap final : public DifferentiableMap {
 public:
  PsiMetaLossMap(const DataAdapter& adapter, const ForecastModel& model, ParamSet theta,
                 TaskData task, double alpha)
      : adapter_(adapter), model_(model), theta_(std::move(theta)), task_(std::move(task)),
        alpha_(alpha) {}

  Tensor forward(const ParamSet& psi, const Tensor& input) const override;
  std::pair<ParamSet, Tensor> backward(const ParamSet& psi, const Tensor& input,
                                       const Tensor& upstream) const override;

 private:
  const DataAdapter& adapter_;
  const ForecastModel& model_;
  ParamSet theta_;
  TaskData task_;
  double alpha_;
};

}  // namespace metadapt
